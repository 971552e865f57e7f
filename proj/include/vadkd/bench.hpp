#pragma once

#include <string>
#include <vector>

#include "vadkd/student.hpp"

namespace vadkd {

struct BenchOptions {
    int warmup_frames = 100;
    int measured_frames = 2000;
    int repetitions = 5;
    int batch = 1;     // frame sequences per forward
    int replicas = 1;  // parallel workers sharing one frozen model
    uint64_t seed = 1;
};

struct BenchReport {
    std::string variant;
    int64_t frames = 0;   // per repetition
    double wall_s = 0.0;  // model-forward wall time of the median repetition
    double fps = 0.0;     // median over repetitions, model forward only
    double fps_e2e = 0.0;  // median over repetitions, incl. input assembly
    double stage_downsample_ms = 0.0;  // mean per frame
    double stage_transformer_ms = 0.0;
    double stage_heads_ms = 0.0;
};

// Eval-mode single-precision throughput of a freshly built model on
// synthesized input sequences. FPS is the median over `repetitions` runs of
// `measured_frames` frames after `warmup_frames` of warmup; checkpoints are
// never touched.
BenchReport run_bench(const ModelConfig& cfg, const std::string& variant_id, const BenchOptions& opts);

// CSV: variant,frames,wall_s,fps,fps_e2e,stage_downsample_ms,
//      stage_transformer_ms,stage_heads_ms
void write_bench_csv(const std::string& path, const std::vector<BenchReport>& reports);

}  // namespace vadkd
