#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vadkd/distill.hpp"
#include "vadkd/student.hpp"
#include "vadkd/synthvid.hpp"
#include "vadkd/teachers.hpp"

namespace vadkd {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TeacherSpec {
    enum class Kind { oracle, precomputed };
    Kind kind = Kind::oracle;
    OracleTeacherConfig oracle;
    std::string dir;  // precomputed maps
};

// The unified JSON run document. Every section is optional and falls back to
// defaults; unknown keys anywhere are rejected before any work happens.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    int epochs_pretrain = 35;
    int epochs_distill = 35;
    SceneConfig scene;
    std::vector<TeacherSpec> teachers = default_teacher_specs();
    std::string data_dir = "data";
    std::string out_dir = "out";

    static std::vector<TeacherSpec> default_teacher_specs();
    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// Instantiates the configured teachers; oracle teachers read ground-truth
// masks from <data_dir>/masks.
std::vector<std::unique_ptr<Teacher>> build_teachers(const RunConfig& cfg);

}  // namespace vadkd
