#include "vadkd/synthvid.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace vadkd {

namespace fs = std::filesystem;

void SceneConfig::validate() const {
    if (height < 16 || width < 16) throw std::invalid_argument("scene: resolution must be at least 16x16");
    if (clip_length < 3) throw std::invalid_argument("scene: clip_length must be at least 3");
    if (train_videos < 1 || test_videos < 0) throw std::invalid_argument("scene: video counts invalid");
    if (sprites_min < 0 || sprites_max < sprites_min)
        throw std::invalid_argument("scene: sprite count range invalid");
    if (anomaly_rate < 0 || anomaly_rate > 0.9)
        throw std::invalid_argument("scene: anomaly_rate must be in [0, 0.9]");
    if (anomaly_types.empty()) throw std::invalid_argument("scene: at least one anomaly type required");
    // Separability by construction.
    if (anomaly_speed_min <= normal_speed_max)
        throw std::invalid_argument("scene: anomalous speed range overlaps normal range");
    if (anomaly_size_min <= normal_size_max)
        throw std::invalid_argument("scene: anomalous size range overlaps normal range");
}

std::vector<float> make_background(int h, int w, uint64_t seed) {
    std::vector<float> bg(static_cast<size_t>(h) * w);
    Rng rng(seed);
    // Coarse 8x8 patchwork plus a gentle gradient; static per video.
    const int cell = 8;
    const int cells_x = (w + cell - 1) / cell;
    const int cells_y = (h + cell - 1) / cell;
    std::vector<float> patch(static_cast<size_t>(cells_x) * cells_y);
    for (auto& p : patch) p = static_cast<float>(rng.uniform(-0.06, 0.06));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float v = 0.30f + 0.10f * static_cast<float>(x) / static_cast<float>(w) +
                      0.05f * static_cast<float>(y) / static_cast<float>(h);
            v += patch[static_cast<size_t>(y / cell) * cells_x + x / cell];
            bg[static_cast<size_t>(y) * w + x] = std::clamp(v, 0.0f, 1.0f);
        }
    }
    return bg;
}

namespace {

bool sprite_covers(const SpriteState& s, int y, int x) {
    const double dy = y - s.y, dx = x - s.x;
    const double half = s.size / 2.0;
    switch (s.shape) {
        case SpriteShape::disc:
            return dy * dy + dx * dx <= half * half;
        case SpriteShape::square:
            return std::abs(dy) <= half && std::abs(dx) <= half;
        case SpriteShape::cross: {
            const double bar = std::max(1.0, s.size / 6.0);
            return (std::abs(dy) <= bar && std::abs(dx) <= half) ||
                   (std::abs(dx) <= bar && std::abs(dy) <= half);
        }
    }
    return false;
}

template <class Fn>
void for_sprite_pixels(const SpriteState& s, int h, int w, Fn&& fn) {
    const int half = s.size / 2 + 1;
    const int y0 = std::max(0, static_cast<int>(std::floor(s.y)) - half);
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.y)) + half);
    const int x0 = std::max(0, static_cast<int>(std::floor(s.x)) - half);
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.x)) + half);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (sprite_covers(s, y, x)) fn(y, x);
}

struct MovingSprite {
    SpriteState state;
    double vx = 0, vy = 0;
    int enter_frame = 0;
    int exit_frame = 0;  // exclusive

    bool present(int frame) const { return frame >= enter_frame && frame < exit_frame; }

    void step(int h, int w) {
        state.x += vx;
        state.y += vy;
        const double margin = 2.0;
        if (state.x < margin) {
            state.x = margin;
            vx = std::abs(vx);
        }
        if (state.x > w - 1 - margin) {
            state.x = w - 1 - margin;
            vx = -std::abs(vx);
        }
        if (state.y < margin) {
            state.y = margin;
            vy = std::abs(vy);
        }
        if (state.y > h - 1 - margin) {
            state.y = h - 1 - margin;
            vy = -std::abs(vy);
        }
    }
};

MovingSprite make_normal_sprite(const SceneConfig& cfg, Rng& rng, int clip_length) {
    MovingSprite ms;
    ms.state.shape = rng.bernoulli(0.5) ? SpriteShape::disc : SpriteShape::square;
    ms.state.size = static_cast<int>(rng.below(cfg.normal_size_max - cfg.normal_size_min + 1)) +
                    cfg.normal_size_min;
    ms.state.brightness = rng.uniform(0.65, 0.9);
    ms.state.x = rng.uniform(4.0, cfg.width - 5.0);
    ms.state.y = rng.uniform(4.0, cfg.height - 5.0);
    const double speed = rng.uniform(cfg.normal_speed_min, cfg.normal_speed_max);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    ms.vx = speed * std::cos(angle);
    ms.vy = speed * std::sin(angle);
    ms.enter_frame = 0;
    ms.exit_frame = clip_length;
    ms.state.anomalous = false;
    return ms;
}

MovingSprite make_anomalous_sprite(const SceneConfig& cfg, Rng& rng, int enter, int exit) {
    MovingSprite ms = make_normal_sprite(cfg, rng, 0);
    const AnomalyKind kind = cfg.anomaly_types[rng.below(cfg.anomaly_types.size())];
    switch (kind) {
        case AnomalyKind::fast_mover: {
            const double speed = rng.uniform(cfg.anomaly_speed_min, cfg.anomaly_speed_max);
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            ms.vx = speed * std::cos(angle);
            ms.vy = speed * std::sin(angle);
            break;
        }
        case AnomalyKind::oversized:
            ms.state.size = static_cast<int>(rng.below(cfg.anomaly_size_max - cfg.anomaly_size_min + 1)) +
                            cfg.anomaly_size_min;
            break;
        case AnomalyKind::novel_shape:
            ms.state.shape = SpriteShape::cross;
            break;
    }
    ms.state.anomalous = true;
    ms.enter_frame = enter;
    ms.exit_frame = exit;
    return ms;
}

VideoClip simulate_clip(const SceneConfig& cfg, const std::string& id, uint64_t clip_seed,
                        bool with_anomalies) {
    Rng rng(clip_seed);
    VideoClip clip;
    clip.id = id;
    clip.height = cfg.height;
    clip.width = cfg.width;
    const auto background = make_background(cfg.height, cfg.width, derive_seed(clip_seed, "bg"));

    std::vector<MovingSprite> sprites;
    const int n_sprites =
        cfg.sprites_min + static_cast<int>(rng.below(cfg.sprites_max - cfg.sprites_min + 1));
    for (int i = 0; i < n_sprites; ++i) sprites.push_back(make_normal_sprite(cfg, rng, cfg.clip_length));

    if (with_anomalies && cfg.anomaly_rate > 0) {
        // Disjoint mid-clip windows whose union covers ~anomaly_rate of the
        // clip; the anomaly enters and leaves while the video runs.
        int target = static_cast<int>(std::lround(cfg.anomaly_rate * cfg.clip_length *
                                                  rng.uniform(0.9, 1.1)));
        target = std::clamp(target, 1, cfg.clip_length - 4);
        const int episodes = target > 24 && rng.bernoulli(0.5) ? 2 : 1;
        const int len0 = episodes == 2 ? target / 2 : target;
        const int len1 = target - len0;
        const int lead0 = 2 + static_cast<int>(rng.below(
                                  std::max(1, cfg.clip_length - 4 - target - (episodes == 2 ? 4 : 0))));
        sprites.push_back(make_anomalous_sprite(cfg, rng, lead0, lead0 + len0));
        if (episodes == 2) {
            const int remain = cfg.clip_length - 2 - (lead0 + len0 + 2) - len1;
            const int lead1 = lead0 + len0 + 2 + static_cast<int>(rng.below(std::max(1, remain)));
            sprites.push_back(make_anomalous_sprite(cfg, rng, lead1, lead1 + len1));
        }
    }

    for (int f = 0; f < cfg.clip_length; ++f) {
        std::vector<SpriteState> active;
        for (auto& ms : sprites)
            if (ms.present(f)) active.push_back(ms.state);
        clip.frames.push_back(render_frame(background, cfg.height, cfg.width, active));
        AnomalyMap mask = gt_anomaly_map(cfg.height, cfg.width, active);
        clip.labels.push_back(mask.max_value() > 0.0f ? 1 : 0);
        clip.masks.push_back(std::move(mask));
        for (auto& ms : sprites)
            if (ms.present(f)) ms.step(cfg.height, cfg.width);
    }
    return clip;
}

}  // namespace

std::vector<uint8_t> render_frame(const std::vector<float>& background, int h, int w,
                                  const std::vector<SpriteState>& sprites) {
    std::vector<float> canvas = background;
    for (const auto& s : sprites)
        for_sprite_pixels(s, h, w, [&](int y, int x) {
            float& px = canvas[static_cast<size_t>(y) * w + x];
            px = std::max(px, static_cast<float>(s.brightness));
        });
    std::vector<uint8_t> out(canvas.size());
    for (size_t i = 0; i < canvas.size(); ++i)
        out[i] = static_cast<uint8_t>(std::lround(std::clamp(canvas[i], 0.0f, 1.0f) * 255.0f));
    return out;
}

AnomalyMap gt_anomaly_map(int h, int w, const std::vector<SpriteState>& sprites) {
    AnomalyMap mask;
    mask.h = h;
    mask.w = w;
    mask.values.assign(static_cast<size_t>(h) * w, 0.0f);
    for (const auto& s : sprites) {
        if (!s.anomalous) continue;
        for_sprite_pixels(s, h, w, [&](int y, int x) { mask.values[static_cast<size_t>(y) * w + x] = 1.0f; });
    }
    return mask;
}

Dataset generate_dataset(const SceneConfig& cfg) {
    cfg.validate();
    Dataset ds;
    char buf[32];
    for (int i = 0; i < cfg.train_videos; ++i) {
        std::snprintf(buf, sizeof(buf), "train_%03d", i);
        ds.train.push_back(simulate_clip(cfg, buf, derive_seed(cfg.seed, std::string("train/") + buf), false));
    }
    for (int i = 0; i < cfg.test_videos; ++i) {
        std::snprintf(buf, sizeof(buf), "test_%03d", i);
        ds.test.push_back(simulate_clip(cfg, buf, derive_seed(cfg.seed, std::string("test/") + buf), true));
    }
    return ds;
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("pgm: cannot open " + path + " for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("pgm: write failed for " + path);
}

std::vector<uint8_t> read_pgm(const std::string& path, int& h, int& w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pgm: cannot open " + path);
    std::string magic;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5") throw MagicError("pgm: bad magic in " + path);
    if (maxval != 255) throw IoError("pgm: unsupported maxval in " + path);
    in.get();  // single whitespace after header
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w);
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (static_cast<size_t>(in.gcount()) != pixels.size())
        throw TruncationError("pgm: truncated pixel payload in " + path);
    return pixels;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    auto write_split = [&](const std::vector<VideoClip>& clips, const std::string& split) {
        for (const auto& clip : clips) {
            const fs::path vdir = fs::path(dir) / split / clip.id;
            fs::create_directories(vdir);
            std::ofstream labels(vdir / "labels.csv", std::ios::trunc);
            if (!labels) throw IoError("dataset: cannot write " + (vdir / "labels.csv").string());
            labels << "frame_index,label\n";
            for (size_t f = 0; f < clip.frames.size(); ++f) {
                write_pgm((vdir / (std::to_string(f) + ".pgm")).string(), clip.frames[f], clip.height,
                          clip.width);
                labels << f << "," << clip.labels[f] << "\n";
            }
            const fs::path mdir = fs::path(dir) / "masks" / clip.id;
            fs::create_directories(mdir);
            for (size_t f = 0; f < clip.masks.size(); ++f)
                save_amap((mdir / (std::to_string(f) + ".amap")).string(), clip.masks[f]);
        }
    };
    write_split(ds.train, "train");
    write_split(ds.test, "test");
}

std::vector<LoadedVideo> load_split(const std::string& dir, const std::string& split) {
    const fs::path sdir = fs::path(dir) / split;
    if (!fs::exists(sdir)) throw IoError("dataset: split directory missing: " + sdir.string());
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(sdir))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());

    std::vector<LoadedVideo> videos;
    for (const auto& id : ids) {
        LoadedVideo v;
        v.id = id;
        const fs::path vdir = sdir / id;
        std::ifstream labels(vdir / "labels.csv");
        if (!labels) throw IoError("dataset: missing labels.csv in " + vdir.string());
        std::string line;
        std::getline(labels, line);  // header
        std::vector<int> label_values;
        while (std::getline(labels, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            label_values.push_back(std::stoi(line.substr(comma + 1)));
        }
        for (size_t f = 0; f < label_values.size(); ++f) {
            int h = 0, w = 0;
            const auto pixels = read_pgm((vdir / (std::to_string(f) + ".pgm")).string(), h, w);
            v.height = h;
            v.width = w;
            std::vector<float> frame(pixels.size());
            for (size_t i = 0; i < pixels.size(); ++i) frame[i] = static_cast<float>(pixels[i]) / 255.0f;
            v.frames.push_back(std::move(frame));
        }
        v.labels = std::move(label_values);
        videos.push_back(std::move(v));
    }
    return videos;
}

}  // namespace vadkd
