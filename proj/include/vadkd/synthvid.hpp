#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vadkd/teachers.hpp"

namespace vadkd {

enum class AnomalyKind { fast_mover, oversized, novel_shape };
enum class SpriteShape { disc, square, cross };

// Moving-sprite scene parameters. Anomaly parameter ranges are disjoint from
// the normal ranges by construction (speed 3-5 vs 0.5-1.5, size 11-15 vs 4-7,
// cross shape vs disc/square), so the splits are separable.
struct SceneConfig {
    int height = 64;
    int width = 64;
    int clip_length = 100;
    int train_videos = 30;
    int test_videos = 12;
    int sprites_min = 2;
    int sprites_max = 4;
    double normal_speed_min = 0.5;
    double normal_speed_max = 1.5;
    int normal_size_min = 4;
    int normal_size_max = 7;
    double anomaly_speed_min = 3.0;
    double anomaly_speed_max = 5.0;
    int anomaly_size_min = 11;
    int anomaly_size_max = 15;
    std::vector<AnomalyKind> anomaly_types = {AnomalyKind::fast_mover, AnomalyKind::oversized,
                                              AnomalyKind::novel_shape};
    double anomaly_rate = 0.3;
    uint64_t seed = 11;

    void validate() const;
};

struct SpriteState {
    SpriteShape shape = SpriteShape::disc;
    double x = 0, y = 0;
    int size = 5;
    double brightness = 0.8;
    bool anomalous = false;
};

// Static per-video backdrop with mild fixed texture.
std::vector<float> make_background(int h, int w, uint64_t seed);

// Sprites rasterized as integer boxes/discs over the backdrop, brightest
// wins per pixel. 8-bit output.
std::vector<uint8_t> render_frame(const std::vector<float>& background, int h, int w,
                                  const std::vector<SpriteState>& sprites);

// 1.0 on anomalous sprites' pixels, 0 elsewhere.
AnomalyMap gt_anomaly_map(int h, int w, const std::vector<SpriteState>& sprites);

struct VideoClip {
    std::string id;
    int height = 0, width = 0;
    std::vector<std::vector<uint8_t>> frames;
    std::vector<int> labels;        // 1 iff the frame's mask has support
    std::vector<AnomalyMap> masks;  // per-frame ground truth
};

struct Dataset {
    std::vector<VideoClip> train;  // normal only
    std::vector<VideoClip> test;   // mixed, labelled
};

// Fully deterministic in cfg.seed; clips draw from independent sub-streams.
Dataset generate_dataset(const SceneConfig& cfg);

// Layout: <dir>/<split>/<video_id>/<frame>.pgm + labels.csv per video,
// masks as <dir>/masks/<video_id>/<frame>.amap.
void write_dataset(const Dataset& ds, const std::string& dir);

// Frames normalized to [0,1] floats on load.
struct LoadedVideo {
    std::string id;
    int height = 0, width = 0;
    std::vector<std::vector<float>> frames;
    std::vector<int> labels;
};

std::vector<LoadedVideo> load_split(const std::string& dir, const std::string& split);

// Binary 8-bit PGM (P5).
void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w);
std::vector<uint8_t> read_pgm(const std::string& path, int& h, int& w);

}  // namespace vadkd
