#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vadkd/io_common.hpp"
#include "vadkd/rng.hpp"

namespace vadkd {

// Full-resolution anomaly map, plain single-precision row-major values.
struct AnomalyMap {
    int64_t h = 0, w = 0;
    std::vector<float> values;

    float max_value() const;
};

enum class TeacherProvenance { oracle, precomputed };

struct TeacherOutput {
    AnomalyMap full_map;
    TeacherProvenance provenance = TeacherProvenance::oracle;
};

// AMAP: magic "AMP1", u32-le height, u32-le width, f32-le row-major values.
void save_amap(const std::string& path, const AnomalyMap& map);
AnomalyMap load_amap(const std::string& path);

// Precomputed-map layout: <dir>/<video_id>/<frame_index>.amap
std::string amap_path(const std::string& dir, const std::string& video_id, int frame_index);
TeacherOutput load_precomputed(const std::string& dir, const std::string& video_id, int frame_index);
void store_precomputed(const std::string& dir, const std::string& video_id, int frame_index,
                       const AnomalyMap& map);

// Adaptive max pooling of a full map to each requested resolution; the
// maximum of every pooled map equals the maximum of the source.
std::vector<AnomalyMap> downsample_map(const AnomalyMap& full,
                                       const std::vector<std::pair<int, int>>& resolutions);

// Imperfections of the synthetic oracle: additive Gaussian pixel noise, box
// blur, and whole-blob misses that stand in for a detector not knowing an
// object class. Misses are keyed per (video, blob slot), so a missed object
// stays missed for its whole video.
struct OracleTeacherConfig {
    double noise_std = 0.1;
    int blur_radius = 1;
    double miss_rate = 0.1;
    uint64_t seed = 0;

    void validate() const;
};

// Ground-truth mask -> teacher map: drop blobs, blur, add noise, clamp to
// [0,1]. Deterministic in (cfg.seed, video_id, frame_index).
TeacherOutput oracle_teacher(const AnomalyMap& gt_mask, const std::string& video_id, int frame_index,
                             const OracleTeacherConfig& cfg);

// Uniform interface the distillation loop consumes: a teacher is a pure
// function of (video, frame) producing a full-resolution map.
class Teacher {
public:
    virtual ~Teacher() = default;
    virtual TeacherOutput full_map(const std::string& video_id, int frame_index) const = 0;
    virtual std::string describe() const = 0;
};

// Reads ground-truth masks from <mask_dir>/<video_id>/<frame>.amap and
// corrupts them per the oracle config.
class OracleTeacher : public Teacher {
public:
    OracleTeacher(std::string mask_dir, OracleTeacherConfig cfg);
    TeacherOutput full_map(const std::string& video_id, int frame_index) const override;
    std::string describe() const override;

private:
    std::string mask_dir_;
    OracleTeacherConfig cfg_;
};

class PrecomputedTeacher : public Teacher {
public:
    explicit PrecomputedTeacher(std::string dir);
    TeacherOutput full_map(const std::string& video_id, int frame_index) const override;
    std::string describe() const override;

private:
    std::string dir_;
};

}  // namespace vadkd
