#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vadkd/bench.hpp"
#include "vadkd/config.hpp"
#include "vadkd/distill.hpp"
#include "vadkd/metrics.hpp"

namespace vadkd {

// --- Frame scoring (evaluation mode, clamped temporal context so every
// frame of a clip receives a score) ---

template <class T>
std::vector<ScoreSeries> score_with_student(StudentModelT<T>& model,
                                            const std::vector<LoadedVideo>& videos, int t,
                                            int batch_size);

// Reconstruction-error baseline: per-frame mean squared error of the
// autoencoder's middle-frame reconstruction.
template <class T>
std::vector<ScoreSeries> score_with_autoencoder(StudentModelT<T>& model, DecoderT<T>& decoder,
                                                const std::vector<LoadedVideo>& videos, int t,
                                                int batch_size);

// Teacher's own frame scores: mean over resolutions of each pooled map's max.
// Scaling is optional (raw oracle maps are already in [0,1]).
std::vector<ScoreSeries> score_with_teacher(const Teacher& teacher,
                                            const std::vector<LoadedVideo>& videos,
                                            const std::vector<std::pair<int, int>>& resolutions,
                                            const TeacherScaling* scaling);

// --- Config-driven subcommands; artifacts land under cfg.out_dir ---

void run_gen(const RunConfig& cfg);

// encoder.ckpt + decoder.ckpt + pretrain_loss.csv
void run_pretrain(const RunConfig& cfg);

// student.ckpt + distill_loss.csv; requires encoder.ckpt
void run_distill(const RunConfig& cfg);

enum class EvalSource { student, oracle, ae };

struct EvalOutcome {
    double micro = 0.0;
    double macro = 0.0;
    std::vector<ScoreSeries> series;
};

// eval_report.csv + scores.csv; source picks the scoring path (student
// checkpoint, a configured teacher's own maps, or the phase-1 autoencoder's
// reconstruction error).
EvalOutcome run_eval(const RunConfig& cfg, EvalSource source, int teacher_index = 0);

// bench.csv; variants cover the configured model plus, when requested, the
// dense-FFN twin and the block-count sweep.
struct BenchCommandOptions {
    BenchOptions options;
    bool include_dense = false;
    std::vector<int> m_sweep;  // additional block-count variants
};

std::vector<BenchReport> run_bench_cmd(const RunConfig& cfg, const BenchCommandOptions& opts);

// ablation.csv rows: axis,config,micro_auc,macro_auc
struct AblationRow {
    std::string axis;
    std::string config;
    double micro = 0.0;
    double macro = 0.0;
};

std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::vector<std::string>& axes);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace vadkd
