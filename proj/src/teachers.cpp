#include "vadkd/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace vadkd {

float AnomalyMap::max_value() const {
    float best = 0.0f;
    for (float v : values) best = std::max(best, v);
    return best;
}

void save_amap(const std::string& path, const AnomalyMap& map) {
    if (static_cast<int64_t>(map.values.size()) != map.h * map.w)
        throw IoError("amap: map holds " + std::to_string(map.values.size()) + " values for " +
                      std::to_string(map.h) + "x" + std::to_string(map.w));
    std::string out;
    out += "AMP1";
    detail::put_u32(out, static_cast<uint32_t>(map.h));
    detail::put_u32(out, static_cast<uint32_t>(map.w));
    for (float v : map.values) detail::put_f32(out, v);
    detail::write_file(path, out, "amap");
}

AnomalyMap load_amap(const std::string& path) {
    detail::ByteReader r{detail::read_file(path, "amap"), 0, path, "amap"};
    if (r.bytes(4, "magic") != "AMP1") throw MagicError("amap: bad magic in " + path);
    AnomalyMap map;
    map.h = r.u32("height");
    map.w = r.u32("width");
    const int64_t n = map.h * map.w;
    map.values.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) map.values[static_cast<size_t>(i)] = r.f32("map values");
    return map;
}

std::string amap_path(const std::string& dir, const std::string& video_id, int frame_index) {
    return dir + "/" + video_id + "/" + std::to_string(frame_index) + ".amap";
}

TeacherOutput load_precomputed(const std::string& dir, const std::string& video_id, int frame_index) {
    return TeacherOutput{load_amap(amap_path(dir, video_id, frame_index)), TeacherProvenance::precomputed};
}

void store_precomputed(const std::string& dir, const std::string& video_id, int frame_index,
                       const AnomalyMap& map) {
    std::filesystem::create_directories(dir + "/" + video_id);
    save_amap(amap_path(dir, video_id, frame_index), map);
}

std::vector<AnomalyMap> downsample_map(const AnomalyMap& full,
                                       const std::vector<std::pair<int, int>>& resolutions) {
    std::vector<AnomalyMap> out;
    out.reserve(resolutions.size());
    for (auto [oh, ow] : resolutions) {
        if (oh < 1 || ow < 1 || oh > full.h || ow > full.w)
            throw std::invalid_argument("downsample_map: target " + std::to_string(oh) + "x" + std::to_string(ow) +
                                        " exceeds map " + std::to_string(full.h) + "x" + std::to_string(full.w));
        AnomalyMap m;
        m.h = oh;
        m.w = ow;
        m.values.resize(static_cast<size_t>(oh) * ow);
        for (int64_t oy = 0; oy < oh; ++oy) {
            const int64_t y0 = oy * full.h / oh, y1 = (oy + 1) * full.h / oh;
            for (int64_t ox = 0; ox < ow; ++ox) {
                const int64_t x0 = ox * full.w / ow, x1 = (ox + 1) * full.w / ow;
                float best = full.values[static_cast<size_t>(y0 * full.w + x0)];
                for (int64_t y = y0; y < y1; ++y)
                    for (int64_t x = x0; x < x1; ++x)
                        best = std::max(best, full.values[static_cast<size_t>(y * full.w + x)]);
                m.values[static_cast<size_t>(oy * ow + ox)] = best;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

void OracleTeacherConfig::validate() const {
    if (noise_std < 0) throw std::invalid_argument("oracle teacher: noise_std must be >= 0");
    if (blur_radius < 0) throw std::invalid_argument("oracle teacher: blur_radius must be >= 0");
    if (miss_rate < 0 || miss_rate > 1)
        throw std::invalid_argument("oracle teacher: miss_rate must be in [0, 1]");
}

namespace {

// 4-connected components of the positive support, labelled in raster order of
// their first pixel. The raster index is what the miss decision is keyed on,
// so a moving blob keeps its slot from frame to frame as long as blobs do not
// overtake each other in scan order.
std::vector<int> label_blobs(const AnomalyMap& mask, int& blob_count) {
    const int64_t h = mask.h, w = mask.w;
    std::vector<int> labels(static_cast<size_t>(h * w), -1);
    blob_count = 0;
    std::vector<int64_t> stack;
    for (int64_t start = 0; start < h * w; ++start) {
        if (mask.values[static_cast<size_t>(start)] <= 0.0f || labels[static_cast<size_t>(start)] >= 0)
            continue;
        const int label = blob_count++;
        stack.push_back(start);
        labels[static_cast<size_t>(start)] = label;
        while (!stack.empty()) {
            const int64_t idx = stack.back();
            stack.pop_back();
            const int64_t y = idx / w, x = idx % w;
            const int64_t neighbors[4] = {idx - w, idx + w, idx - 1, idx + 1};
            const bool valid[4] = {y > 0, y + 1 < h, x > 0, x + 1 < w};
            for (int d = 0; d < 4; ++d) {
                if (!valid[d]) continue;
                const int64_t ni = neighbors[d];
                if (mask.values[static_cast<size_t>(ni)] > 0.0f && labels[static_cast<size_t>(ni)] < 0) {
                    labels[static_cast<size_t>(ni)] = label;
                    stack.push_back(ni);
                }
            }
        }
    }
    return labels;
}

AnomalyMap box_blur(const AnomalyMap& map, int radius) {
    if (radius <= 0) return map;
    AnomalyMap out;
    out.h = map.h;
    out.w = map.w;
    out.values.resize(map.values.size());
    const int64_t h = map.h, w = map.w;
    const float norm = 1.0f / ((2 * radius + 1) * (2 * radius + 1));
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int64_t dy = -radius; dy <= radius; ++dy) {
                const int64_t yy = std::clamp(y + dy, int64_t(0), h - 1);
                for (int64_t dx = -radius; dx <= radius; ++dx) {
                    const int64_t xx = std::clamp(x + dx, int64_t(0), w - 1);
                    acc += map.values[static_cast<size_t>(yy * w + xx)];
                }
            }
            out.values[static_cast<size_t>(y * w + x)] = acc * norm;
        }
    }
    return out;
}

}  // namespace

TeacherOutput oracle_teacher(const AnomalyMap& gt_mask, const std::string& video_id, int frame_index,
                             const OracleTeacherConfig& cfg) {
    cfg.validate();
    AnomalyMap map = gt_mask;

    if (cfg.miss_rate > 0.0) {
        int blob_count = 0;
        const auto labels = label_blobs(map, blob_count);
        std::vector<bool> dropped(static_cast<size_t>(blob_count));
        for (int b = 0; b < blob_count; ++b) {
            Rng decision(derive_seed(cfg.seed, video_id + "/blob" + std::to_string(b)));
            dropped[static_cast<size_t>(b)] = decision.bernoulli(cfg.miss_rate);
        }
        for (size_t i = 0; i < map.values.size(); ++i)
            if (labels[i] >= 0 && dropped[static_cast<size_t>(labels[i])]) map.values[i] = 0.0f;
    }

    map = box_blur(map, cfg.blur_radius);

    if (cfg.noise_std > 0.0) {
        Rng noise(derive_seed(cfg.seed, video_id + "#" + std::to_string(frame_index)));
        for (auto& v : map.values) v += static_cast<float>(noise.normal(0.0, cfg.noise_std));
    }

    for (auto& v : map.values) v = std::clamp(v, 0.0f, 1.0f);
    return TeacherOutput{std::move(map), TeacherProvenance::oracle};
}

OracleTeacher::OracleTeacher(std::string mask_dir, OracleTeacherConfig cfg)
    : mask_dir_(std::move(mask_dir)), cfg_(cfg) {
    cfg_.validate();
}

TeacherOutput OracleTeacher::full_map(const std::string& video_id, int frame_index) const {
    const AnomalyMap mask = load_amap(amap_path(mask_dir_, video_id, frame_index));
    return oracle_teacher(mask, video_id, frame_index, cfg_);
}

std::string OracleTeacher::describe() const {
    return "oracle(noise_std=" + std::to_string(cfg_.noise_std) + ",blur=" + std::to_string(cfg_.blur_radius) +
           ",miss_rate=" + std::to_string(cfg_.miss_rate) + ",seed=" + std::to_string(cfg_.seed) + ")";
}

PrecomputedTeacher::PrecomputedTeacher(std::string dir) : dir_(std::move(dir)) {}

TeacherOutput PrecomputedTeacher::full_map(const std::string& video_id, int frame_index) const {
    return load_precomputed(dir_, video_id, frame_index);
}

std::string PrecomputedTeacher::describe() const { return "precomputed(" + dir_ + ")"; }

}  // namespace vadkd
