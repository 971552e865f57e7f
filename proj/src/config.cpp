#include "vadkd/config.hpp"

#include <fstream>
#include <set>

namespace vadkd {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("config: unknown key " + where + "." + it.key());
}

template <class V>
V get_or(const json& obj, const char* key, V fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<V>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for ") + key + ": " + e.what());
    }
}

std::pair<int, int> get_pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError("config: " + where + " must be a [h, w] pair");
    return {v[0].get<int>(), v[1].get<int>()};
}

void parse_model(const json& obj, ModelConfig& m) {
    reject_unknown_keys(obj,
                        {"m", "s", "d", "c", "head_resolutions", "input_frames", "frame_channels",
                         "input_resolution", "ffn_kind", "downsample_filters"},
                        "model");
    m.m = get_or(obj, "m", m.m);
    m.s = get_or(obj, "s", m.s);
    m.d = get_or(obj, "d", m.d);
    m.c = get_or(obj, "c", m.c);
    m.input_frames = get_or(obj, "input_frames", m.input_frames);
    m.frame_channels = get_or(obj, "frame_channels", m.frame_channels);
    if (obj.contains("input_resolution")) {
        auto [h, w] = get_pair(obj.at("input_resolution"), "model.input_resolution");
        m.input_h = h;
        m.input_w = w;
    }
    if (obj.contains("head_resolutions")) {
        m.head_resolutions.clear();
        for (const auto& v : obj.at("head_resolutions"))
            m.head_resolutions.push_back(get_pair(v, "model.head_resolutions[]"));
    }
    if (obj.contains("ffn_kind")) {
        const std::string kind = obj.at("ffn_kind").get<std::string>();
        if (kind == "pointwise")
            m.ffn_kind = FfnKind::pointwise;
        else if (kind == "dense")
            m.ffn_kind = FfnKind::dense;
        else
            throw ConfigError("config: model.ffn_kind must be \"pointwise\" or \"dense\"");
    }
    if (obj.contains("downsample_filters"))
        m.downsample_filters = obj.at("downsample_filters").get<std::vector<int>>();
}

void parse_train(const json& obj, TrainConfig& t, int& epochs_pretrain, int& epochs_distill) {
    reject_unknown_keys(obj,
                        {"epochs", "epochs_pretrain", "epochs_distill", "batch_size", "lr", "weight_decay",
                         "temporal_stride", "alpha", "lambdas", "seed", "d_steps_per_s_step", "gan_form",
                         "use_kd", "use_akd"},
                        "train");
    t.epochs = get_or(obj, "epochs", t.epochs);
    epochs_pretrain = get_or(obj, "epochs_pretrain", t.epochs);
    epochs_distill = get_or(obj, "epochs_distill", t.epochs);
    t.batch_size = get_or(obj, "batch_size", t.batch_size);
    t.lr = get_or(obj, "lr", t.lr);
    t.weight_decay = get_or(obj, "weight_decay", t.weight_decay);
    t.temporal_stride = get_or(obj, "temporal_stride", t.temporal_stride);
    t.alpha = get_or(obj, "alpha", t.alpha);
    if (obj.contains("lambdas")) t.lambdas = obj.at("lambdas").get<std::vector<double>>();
    t.seed = get_or<uint64_t>(obj, "seed", t.seed);
    t.d_steps_per_s_step = get_or(obj, "d_steps_per_s_step", t.d_steps_per_s_step);
    if (obj.contains("gan_form")) {
        const std::string form = obj.at("gan_form").get<std::string>();
        if (form == "saturating")
            t.gan_form = GanForm::saturating;
        else if (form == "non_saturating")
            t.gan_form = GanForm::non_saturating;
        else
            throw ConfigError("config: train.gan_form must be \"saturating\" or \"non_saturating\"");
    }
    t.use_kd = get_or(obj, "use_kd", t.use_kd);
    t.use_akd = get_or(obj, "use_akd", t.use_akd);
}

void parse_scene(const json& obj, SceneConfig& s) {
    reject_unknown_keys(obj,
                        {"resolution", "clip_length", "train_videos", "test_videos", "sprites_min",
                         "sprites_max", "normal_speed", "normal_size", "anomaly_speed", "anomaly_size",
                         "anomaly_types", "anomaly_rate", "seed"},
                        "scene");
    if (obj.contains("resolution")) {
        auto [h, w] = get_pair(obj.at("resolution"), "scene.resolution");
        s.height = h;
        s.width = w;
    }
    s.clip_length = get_or(obj, "clip_length", s.clip_length);
    s.train_videos = get_or(obj, "train_videos", s.train_videos);
    s.test_videos = get_or(obj, "test_videos", s.test_videos);
    s.sprites_min = get_or(obj, "sprites_min", s.sprites_min);
    s.sprites_max = get_or(obj, "sprites_max", s.sprites_max);
    if (obj.contains("normal_speed")) {
        const auto& v = obj.at("normal_speed");
        if (!v.is_array() || v.size() != 2) throw ConfigError("config: scene.normal_speed must be [lo, hi]");
        s.normal_speed_min = v[0].get<double>();
        s.normal_speed_max = v[1].get<double>();
    }
    if (obj.contains("normal_size")) {
        auto [lo, hi] = get_pair(obj.at("normal_size"), "scene.normal_size");
        s.normal_size_min = lo;
        s.normal_size_max = hi;
    }
    if (obj.contains("anomaly_speed")) {
        const auto& v = obj.at("anomaly_speed");
        if (!v.is_array() || v.size() != 2) throw ConfigError("config: scene.anomaly_speed must be [lo, hi]");
        s.anomaly_speed_min = v[0].get<double>();
        s.anomaly_speed_max = v[1].get<double>();
    }
    if (obj.contains("anomaly_size")) {
        auto [lo, hi] = get_pair(obj.at("anomaly_size"), "scene.anomaly_size");
        s.anomaly_size_min = lo;
        s.anomaly_size_max = hi;
    }
    if (obj.contains("anomaly_types")) {
        s.anomaly_types.clear();
        for (const auto& v : obj.at("anomaly_types")) {
            const std::string kind = v.get<std::string>();
            if (kind == "fast_mover")
                s.anomaly_types.push_back(AnomalyKind::fast_mover);
            else if (kind == "oversized")
                s.anomaly_types.push_back(AnomalyKind::oversized);
            else if (kind == "novel_shape")
                s.anomaly_types.push_back(AnomalyKind::novel_shape);
            else
                throw ConfigError("config: unknown anomaly type " + kind);
        }
    }
    s.anomaly_rate = get_or(obj, "anomaly_rate", s.anomaly_rate);
    s.seed = get_or<uint64_t>(obj, "seed", s.seed);
}

TeacherSpec parse_teacher(const json& obj, size_t index) {
    const std::string where = "teachers[" + std::to_string(index) + "]";
    if (!obj.contains("type")) throw ConfigError("config: " + where + " missing type");
    const std::string type = obj.at("type").get<std::string>();
    TeacherSpec spec;
    if (type == "oracle") {
        reject_unknown_keys(obj, {"type", "noise_std", "blur_radius", "miss_rate", "seed"}, where);
        spec.kind = TeacherSpec::Kind::oracle;
        spec.oracle.noise_std = get_or(obj, "noise_std", spec.oracle.noise_std);
        spec.oracle.blur_radius = get_or(obj, "blur_radius", spec.oracle.blur_radius);
        spec.oracle.miss_rate = get_or(obj, "miss_rate", spec.oracle.miss_rate);
        spec.oracle.seed = get_or<uint64_t>(obj, "seed", spec.oracle.seed);
    } else if (type == "precomputed") {
        reject_unknown_keys(obj, {"type", "dir"}, where);
        spec.kind = TeacherSpec::Kind::precomputed;
        if (!obj.contains("dir")) throw ConfigError("config: " + where + " missing dir");
        spec.dir = obj.at("dir").get<std::string>();
    } else {
        throw ConfigError("config: " + where + " has unknown type " + type);
    }
    return spec;
}

}  // namespace

std::vector<TeacherSpec> RunConfig::default_teacher_specs() {
    TeacherSpec t1;
    t1.oracle.seed = 101;
    TeacherSpec t2;
    t2.oracle.seed = 202;
    return {t1, t2};
}

void RunConfig::validate() const {
    model.validate();
    train.validate(teachers.size());
    scene.validate();
    for (const auto& t : teachers)
        if (t.kind == TeacherSpec::Kind::oracle) t.oracle.validate();
    if (epochs_pretrain < 0 || epochs_distill < 0) throw ConfigError("config: epochs must be >= 0");
    if (model.input_h != scene.height || model.input_w != scene.width)
        throw ConfigError("config: model.input_resolution must match scene.resolution");
}

RunConfig parse_run_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown_keys(doc, {"model", "train", "scene", "teachers", "paths"}, "<root>");
    RunConfig cfg;
    if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
    if (doc.contains("train")) parse_train(doc.at("train"), cfg.train, cfg.epochs_pretrain, cfg.epochs_distill);
    if (doc.contains("scene")) parse_scene(doc.at("scene"), cfg.scene);
    if (doc.contains("teachers")) {
        cfg.teachers.clear();
        const auto& arr = doc.at("teachers");
        if (!arr.is_array()) throw ConfigError("config: teachers must be an array");
        for (size_t i = 0; i < arr.size(); ++i) cfg.teachers.push_back(parse_teacher(arr[i], i));
    }
    const bool lambdas_given = doc.contains("train") && doc.at("train").contains("lambdas");
    if (!lambdas_given) cfg.train.lambdas.assign(cfg.teachers.size(), 1.0);
    if (doc.contains("paths")) {
        const auto& paths = doc.at("paths");
        reject_unknown_keys(paths, {"data_dir", "out_dir"}, "paths");
        cfg.data_dir = get_or<std::string>(paths, "data_dir", cfg.data_dir);
        cfg.out_dir = get_or<std::string>(paths, "out_dir", cfg.out_dir);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    return parse_run_config(doc);
}

std::vector<std::unique_ptr<Teacher>> build_teachers(const RunConfig& cfg) {
    std::vector<std::unique_ptr<Teacher>> teachers;
    for (const auto& spec : cfg.teachers) {
        if (spec.kind == TeacherSpec::Kind::oracle)
            teachers.push_back(std::make_unique<OracleTeacher>(cfg.data_dir + "/masks", spec.oracle));
        else
            teachers.push_back(std::make_unique<PrecomputedTeacher>(spec.dir));
    }
    return teachers;
}

}  // namespace vadkd
