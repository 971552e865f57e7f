#include "vadkd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include "vadkd/metrics.hpp"

namespace vadkd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

TensorPtrT<float> random_input(const ModelConfig& cfg, int batch, Rng& rng) {
    auto x = TensorT<float>::create({batch, cfg.in_channels(), cfg.input_h, cfg.input_w});
    for (auto& v : x->data) v = static_cast<float>(rng.uniform());
    return x;
}

}  // namespace

BenchReport run_bench(const ModelConfig& cfg, const std::string& variant_id, const BenchOptions& opts) {
    if (opts.batch < 1 || opts.replicas < 1 || opts.repetitions < 1)
        throw std::invalid_argument("bench: batch, replicas and repetitions must be positive");
    auto model = build_student<float>(cfg, opts.seed);

    BenchReport report;
    report.variant = variant_id;
    report.frames = opts.measured_frames;

    Rng rng(derive_seed(opts.seed, "bench"));
    // Inputs prepared up front so the model-forward clock measures only the
    // network; a second clock around assembly+forward gives the e2e figure.
    auto warm_input = random_input(cfg, opts.batch, rng);
    for (int f = 0; f < opts.warmup_frames; f += opts.batch) model.forward(warm_input, false);

    std::vector<double> forward_fps, e2e_fps;
    StageTimes stages;
    int64_t staged_frames = 0;
    for (int rep = 0; rep < opts.repetitions; ++rep) {
        if (opts.replicas == 1) {
            double forward_s = 0.0;
            const auto e2e_start = Clock::now();
            int done = 0;
            while (done < opts.measured_frames) {
                const int b = std::min(opts.batch, opts.measured_frames - done);
                auto x = random_input(cfg, b, rng);
                const auto fwd_start = Clock::now();
                model.forward(x, false, &stages);
                forward_s += seconds_since(fwd_start);
                done += b;
                staged_frames += b;
            }
            const double e2e_s = seconds_since(e2e_start);
            forward_fps.push_back(opts.measured_frames / forward_s);
            e2e_fps.push_back(opts.measured_frames / e2e_s);
            if (rep == opts.repetitions / 2) report.wall_s = forward_s;
        } else {
            // N workers share the frozen model read-only; aggregate frames
            // over aggregate wall time.
            const int per_worker = (opts.measured_frames + opts.replicas - 1) / opts.replicas;
            std::vector<std::thread> workers;
            const auto start = Clock::now();
            for (int wi = 0; wi < opts.replicas; ++wi) {
                workers.emplace_back([&, wi]() {
                    Rng wrng(derive_seed(opts.seed, "bench/worker" + std::to_string(wi)));
                    auto x = random_input(cfg, opts.batch, wrng);
                    for (int f = 0; f < per_worker; f += opts.batch) model.forward(x, false);
                });
            }
            for (auto& w : workers) w.join();
            const double wall = seconds_since(start);
            const double total_frames = static_cast<double>(per_worker) * opts.replicas;
            forward_fps.push_back(total_frames / wall);
            e2e_fps.push_back(total_frames / wall);
            if (rep == opts.repetitions / 2) report.wall_s = wall;
        }
    }

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    report.fps = median(forward_fps);
    report.fps_e2e = median(e2e_fps);
    if (staged_frames > 0) {
        report.stage_downsample_ms = stages.downsample_s * 1000.0 / static_cast<double>(staged_frames);
        report.stage_transformer_ms = stages.transformer_s * 1000.0 / static_cast<double>(staged_frames);
        report.stage_heads_ms = stages.heads_s * 1000.0 / static_cast<double>(staged_frames);
    }
    return report;
}

void write_bench_csv(const std::string& path, const std::vector<BenchReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("bench csv: cannot open " + path + " for writing");
    out << "variant,frames,wall_s,fps,fps_e2e,stage_downsample_ms,stage_transformer_ms,stage_heads_ms\n";
    for (const auto& r : reports)
        out << r.variant << "," << r.frames << "," << format_double(r.wall_s) << "," << format_double(r.fps)
            << "," << format_double(r.fps_e2e) << "," << format_double(r.stage_downsample_ms) << ","
            << format_double(r.stage_transformer_ms) << "," << format_double(r.stage_heads_ms) << "\n";
}

}  // namespace vadkd
