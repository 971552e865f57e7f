#include "vadkd/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "vadkd/checkpoint.hpp"

namespace vadkd {

namespace fs = std::filesystem;

namespace {

std::vector<SequenceRef> all_frames_of(const std::vector<LoadedVideo>& videos) {
    std::vector<SequenceRef> refs;
    for (size_t vi = 0; vi < videos.size(); ++vi)
        for (size_t f = 0; f < videos[vi].frames.size(); ++f)
            refs.push_back(SequenceRef{static_cast<int>(vi), static_cast<int>(f)});
    return refs;
}

std::vector<ScoreSeries> series_skeleton(const std::vector<LoadedVideo>& videos) {
    std::vector<ScoreSeries> series;
    for (const auto& v : videos) {
        ScoreSeries s;
        s.video_id = v.id;
        s.scores.assign(v.frames.size(), 0.0);
        s.labels = v.labels;
        series.push_back(std::move(s));
    }
    return series;
}

}  // namespace

template <class T>
std::vector<ScoreSeries> score_with_student(StudentModelT<T>& model,
                                            const std::vector<LoadedVideo>& videos, int t,
                                            int batch_size) {
    auto series = series_skeleton(videos);
    const auto refs = all_frames_of(videos);
    for (size_t start = 0; start < refs.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(refs.size(), start + static_cast<size_t>(batch_size));
        const std::vector<SequenceRef> batch(refs.begin() + static_cast<long>(start),
                                             refs.begin() + static_cast<long>(end));
        auto x = assemble_batch<T>(videos, batch, model.cfg, t, /*clamp=*/true);
        const auto maps = model.forward(x, false);
        const auto scores = frame_scores<T>(maps);
        for (size_t i = 0; i < batch.size(); ++i)
            series[static_cast<size_t>(batch[i].video)].scores[static_cast<size_t>(batch[i].center)] =
                scores[i];
    }
    return series;
}

template <class T>
std::vector<ScoreSeries> score_with_autoencoder(StudentModelT<T>& model, DecoderT<T>& decoder,
                                                const std::vector<LoadedVideo>& videos, int t,
                                                int batch_size) {
    auto series = series_skeleton(videos);
    const auto refs = all_frames_of(videos);
    for (size_t start = 0; start < refs.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(refs.size(), start + static_cast<size_t>(batch_size));
        const std::vector<SequenceRef> batch(refs.begin() + static_cast<long>(start),
                                             refs.begin() + static_cast<long>(end));
        auto x = assemble_batch<T>(videos, batch, model.cfg, t, /*clamp=*/true);
        auto target = center_frames<T>(videos, batch, model.cfg);
        auto recon = decoder.forward(model.encode(x, false), false);
        const int64_t per = recon->numel() / recon->dim(0);
        for (size_t i = 0; i < batch.size(); ++i) {
            double err = 0.0;
            const T* rd = recon->data.data() + static_cast<int64_t>(i) * per;
            const T* td = target->data.data() + static_cast<int64_t>(i) * per;
            for (int64_t p = 0; p < per; ++p) {
                const double d = static_cast<double>(rd[p]) - static_cast<double>(td[p]);
                err += d * d;
            }
            series[static_cast<size_t>(batch[i].video)].scores[static_cast<size_t>(batch[i].center)] =
                err / static_cast<double>(per);
        }
    }
    return series;
}

std::vector<ScoreSeries> score_with_teacher(const Teacher& teacher,
                                            const std::vector<LoadedVideo>& videos,
                                            const std::vector<std::pair<int, int>>& resolutions,
                                            const TeacherScaling* scaling) {
    auto series = series_skeleton(videos);
    for (size_t vi = 0; vi < videos.size(); ++vi) {
        for (size_t f = 0; f < videos[vi].frames.size(); ++f) {
            auto full = teacher.full_map(videos[vi].id, static_cast<int>(f)).full_map;
            if (scaling) full = scaling->apply(std::move(full));
            series[vi].scores[f] = frame_score(downsample_map(full, resolutions));
        }
    }
    return series;
}

void run_gen(const RunConfig& cfg) {
    const Dataset ds = generate_dataset(cfg.scene);
    write_dataset(ds, cfg.data_dir);
}

void run_pretrain(const RunConfig& cfg) {
    const auto train_videos = load_split(cfg.data_dir, "train");
    auto model = build_student<float>(cfg.model, cfg.train.seed);
    auto decoder = build_decoder<float>(cfg.model, cfg.train.seed);
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.epochs_pretrain;
    tc.phase = Phase::pretrain;
    const auto rows = pretrain_ae<float>(model, decoder, train_videos, tc);
    fs::create_directories(cfg.out_dir);
    save_store(cfg.out_dir + "/encoder.ckpt", model.encoder_store());
    save_store(cfg.out_dir + "/decoder.ckpt", decoder.store());
    write_loss_csv(cfg.out_dir + "/pretrain_loss.csv", rows, cfg.teachers.size());
}

void run_distill(const RunConfig& cfg) {
    const auto train_videos = load_split(cfg.data_dir, "train");
    auto model = build_student<float>(cfg.model, derive_seed(cfg.train.seed, "distill"));
    auto enc_store = model.encoder_store();
    load_store(cfg.out_dir + "/encoder.ckpt", enc_store);

    const auto teachers = build_teachers(cfg);
    std::vector<const Teacher*> teacher_ptrs;
    for (const auto& t : teachers) teacher_ptrs.push_back(t.get());

    TrainConfig tc = cfg.train;
    tc.epochs = cfg.epochs_distill;
    tc.phase = Phase::distill;
    const auto rows = distill_train<float>(model, train_videos, teacher_ptrs, tc);
    fs::create_directories(cfg.out_dir);
    save_store(cfg.out_dir + "/student.ckpt", model.full_store());
    write_loss_csv(cfg.out_dir + "/distill_loss.csv", rows, cfg.teachers.size());
}

EvalOutcome run_eval(const RunConfig& cfg, EvalSource source, int teacher_index) {
    const auto test_videos = load_split(cfg.data_dir, "test");
    EvalOutcome outcome;
    switch (source) {
        case EvalSource::student: {
            auto model = build_student<float>(cfg.model, cfg.train.seed);
            auto store = model.full_store();
            load_store(cfg.out_dir + "/student.ckpt", store);
            outcome.series = score_with_student<float>(model, test_videos, cfg.train.temporal_stride,
                                                       cfg.train.batch_size);
            break;
        }
        case EvalSource::ae: {
            auto model = build_student<float>(cfg.model, cfg.train.seed);
            auto decoder = build_decoder<float>(cfg.model, cfg.train.seed);
            auto enc_store = model.encoder_store();
            load_store(cfg.out_dir + "/encoder.ckpt", enc_store);
            auto dec_store = decoder.store();
            load_store(cfg.out_dir + "/decoder.ckpt", dec_store);
            outcome.series = score_with_autoencoder<float>(model, decoder, test_videos,
                                                           cfg.train.temporal_stride, cfg.train.batch_size);
            break;
        }
        case EvalSource::oracle: {
            if (teacher_index < 0 || static_cast<size_t>(teacher_index) >= cfg.teachers.size())
                throw ConfigError("eval: teacher index " + std::to_string(teacher_index) + " out of range");
            const auto teachers = build_teachers(cfg);
            outcome.series = score_with_teacher(*teachers[static_cast<size_t>(teacher_index)], test_videos,
                                                cfg.model.head_resolutions, nullptr);
            break;
        }
    }
    outcome.micro = micro_auc(outcome.series).auc;
    outcome.macro = macro_auc(outcome.series).auc;
    fs::create_directories(cfg.out_dir);
    write_eval_report(cfg.out_dir + "/eval_report.csv", outcome.series);
    write_score_csv(cfg.out_dir + "/scores.csv", outcome.series);
    return outcome;
}

std::vector<BenchReport> run_bench_cmd(const RunConfig& cfg, const BenchCommandOptions& opts) {
    std::vector<BenchReport> reports;
    auto name_of = [](const ModelConfig& m) {
        return std::string(m.ffn_kind == FfnKind::pointwise ? "pointwise" : "dense") + "_m" +
               std::to_string(m.m) + "_s" + std::to_string(m.s);
    };
    reports.push_back(run_bench(cfg.model, name_of(cfg.model), opts.options));
    if (opts.include_dense) {
        ModelConfig dense = cfg.model;
        dense.ffn_kind = dense.ffn_kind == FfnKind::pointwise ? FfnKind::dense : FfnKind::pointwise;
        reports.push_back(run_bench(dense, name_of(dense), opts.options));
    }
    for (int m : opts.m_sweep) {
        if (m == cfg.model.m) continue;
        ModelConfig variant = cfg.model;
        variant.m = m;
        reports.push_back(run_bench(variant, name_of(variant), opts.options));
    }
    fs::create_directories(cfg.out_dir);
    write_bench_csv(cfg.out_dir + "/bench.csv", reports);
    return reports;
}

namespace {

// One ablation training+evaluation run. Encoder checkpoints are cached by
// architecture signature so axes that share the encoder pretrain it once.
struct AblationContext {
    const RunConfig& base;
    std::vector<LoadedVideo> train_videos;
    std::vector<LoadedVideo> test_videos;
    std::vector<std::unique_ptr<Teacher>> teachers;
    std::vector<std::pair<std::string, std::vector<CkptEntry>>> encoder_cache;

    explicit AblationContext(const RunConfig& cfg) : base(cfg) {
        train_videos = load_split(cfg.data_dir, "train");
        test_videos = load_split(cfg.data_dir, "test");
        teachers = build_teachers(cfg);
    }

    std::string encoder_key(const ModelConfig& m) const {
        std::string key = std::to_string(m.m) + "/" + std::to_string(m.s) + "/" + std::to_string(m.d) + "/" +
                          std::to_string(m.input_frames) + "/" +
                          (m.ffn_kind == FfnKind::pointwise ? "pw" : "fc");
        for (int f : m.downsample_filters) key += "." + std::to_string(f);
        return key;
    }

    std::vector<CkptEntry> pretrained_encoder(const ModelConfig& mcfg) {
        const std::string key = encoder_key(mcfg);
        for (auto& [k, entries] : encoder_cache)
            if (k == key) return entries;
        auto model = build_student<float>(mcfg, base.train.seed);
        auto decoder = build_decoder<float>(mcfg, base.train.seed);
        TrainConfig tc = base.train;
        tc.epochs = base.epochs_pretrain;
        tc.phase = Phase::pretrain;
        pretrain_ae<float>(model, decoder, train_videos, tc);
        auto entries = store_to_entries(model.encoder_store());
        encoder_cache.emplace_back(key, entries);
        return entries;
    }

    AblationRow run_one(const std::string& axis, const std::string& label, const ModelConfig& mcfg,
                        const TrainConfig& tcfg, bool with_pretrain, bool score_by_recon,
                        const std::vector<size_t>& teacher_subset) {
        auto model = build_student<float>(mcfg, derive_seed(base.train.seed, "distill"));
        if (with_pretrain) {
            auto enc_store = model.encoder_store();
            load_entries_into_store(pretrained_encoder(mcfg), enc_store);
        }

        AblationRow row;
        row.axis = axis;
        row.config = label;

        if (score_by_recon) {
            // Reconstruction-only variant: phase-1 model scored by AE error.
            auto decoder = build_decoder<float>(mcfg, base.train.seed);
            TrainConfig tc = tcfg;
            tc.epochs = base.epochs_pretrain;
            tc.phase = Phase::pretrain;
            pretrain_ae<float>(model, decoder, train_videos, tc);
            auto series = score_with_autoencoder<float>(model, decoder, test_videos, tcfg.temporal_stride,
                                                        tcfg.batch_size);
            row.micro = micro_auc(series).auc;
            row.macro = macro_auc(series).auc;
            return row;
        }

        std::vector<const Teacher*> subset;
        std::vector<double> lambdas;
        for (size_t ti : teacher_subset) {
            subset.push_back(teachers[ti].get());
            lambdas.push_back(ti < tcfg.lambdas.size() ? tcfg.lambdas[ti] : 1.0);
        }
        TrainConfig tc = tcfg;
        tc.lambdas = lambdas;
        tc.epochs = base.epochs_distill;
        tc.phase = Phase::distill;
        distill_train<float>(model, train_videos, subset, tc);
        auto series = score_with_student<float>(model, test_videos, tc.temporal_stride, tc.batch_size);
        row.micro = micro_auc(series).auc;
        row.macro = macro_auc(series).auc;
        return row;
    }
};

}  // namespace

std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::vector<std::string>& axes) {
    AblationContext ctx(cfg);
    std::vector<size_t> all_teachers;
    for (size_t i = 0; i < cfg.teachers.size(); ++i) all_teachers.push_back(i);

    std::vector<AblationRow> rows;
    for (const auto& axis : axes) {
        if (axis == "losses") {
            struct Combo {
                const char* label;
                bool ae, kd, akd;
            };
            const Combo combos[] = {{"ae", true, false, false},        {"kd", false, true, false},
                                    {"akd", false, false, true},       {"ae+kd", true, true, false},
                                    {"ae+akd", true, false, true},     {"kd+akd", false, true, true},
                                    {"ae+kd+akd", true, true, true}};
            for (const auto& combo : combos) {
                TrainConfig tc = cfg.train;
                tc.use_kd = combo.kd;
                tc.use_akd = combo.akd;
                if (combo.akd && tc.alpha == 0.0) tc.alpha = 0.1;
                if (!combo.kd && combo.akd) tc.alpha = 1.0;  // adversarial-only objective
                const bool recon_only = !combo.kd && !combo.akd;
                rows.push_back(ctx.run_one("losses", combo.label, cfg.model, tc, combo.ae, recon_only,
                                           all_teachers));
            }
        } else if (axis == "teachers") {
            if (cfg.teachers.size() < 2)
                throw ConfigError("ablate: teachers axis needs at least two configured teachers");
            rows.push_back(ctx.run_one("teachers", "T1", cfg.model, cfg.train, true, false, {0}));
            rows.push_back(ctx.run_one("teachers", "T2", cfg.model, cfg.train, true, false, {1}));
            rows.push_back(ctx.run_one("teachers", "T1+T2", cfg.model, cfg.train, true, false, {0, 1}));
        } else if (axis == "alpha") {
            for (int step = 0; step <= 7; ++step) {
                TrainConfig tc = cfg.train;
                tc.alpha = 0.1 * step;
                tc.use_akd = true;
                char label[16];
                std::snprintf(label, sizeof(label), "alpha=%.1f", tc.alpha);
                rows.push_back(ctx.run_one("alpha", label, cfg.model, tc, true, false, all_teachers));
            }
        } else if (axis == "heads") {
            std::vector<std::vector<std::pair<int, int>>> sets;
            for (auto res : cfg.model.head_resolutions) sets.push_back({res});
            for (size_t k = 2; k <= cfg.model.head_resolutions.size(); ++k)
                sets.emplace_back(cfg.model.head_resolutions.begin(),
                                  cfg.model.head_resolutions.begin() + static_cast<long>(k));
            for (const auto& set : sets) {
                ModelConfig mc = cfg.model;
                mc.head_resolutions = set;
                std::string label = "heads=";
                for (size_t i = 0; i < set.size(); ++i)
                    label += (i ? "+" : "") + std::to_string(set[i].first) + "x" + std::to_string(set[i].second);
                TrainConfig tc = cfg.train;
                tc.lambdas = cfg.train.lambdas;
                rows.push_back(ctx.run_one("heads", label, mc, tc, true, false, all_teachers));
            }
        } else if (axis == "frames") {
            for (int frames : {1, 3, 5}) {
                ModelConfig mc = cfg.model;
                mc.input_frames = frames;
                rows.push_back(ctx.run_one("frames", "frames=" + std::to_string(frames), mc, cfg.train, true,
                                           false, all_teachers));
            }
        } else if (axis == "ffn") {
            for (FfnKind kind : {FfnKind::pointwise, FfnKind::dense}) {
                ModelConfig mc = cfg.model;
                mc.ffn_kind = kind;
                rows.push_back(ctx.run_one("ffn", kind == FfnKind::pointwise ? "pointwise" : "dense", mc,
                                           cfg.train, true, false, all_teachers));
            }
        } else {
            throw ConfigError("ablate: unknown axis " + axis);
        }
    }
    fs::create_directories(cfg.out_dir);
    write_ablation_csv(cfg.out_dir + "/ablation.csv", rows);
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("ablation csv: cannot open " + path + " for writing");
    out << "axis,config,micro_auc,macro_auc\n";
    for (const auto& row : rows)
        out << row.axis << "," << row.config << "," << format_double(row.micro) << ","
            << format_double(row.macro) << "\n";
}

template std::vector<ScoreSeries> score_with_student<float>(StudentModelT<float>&,
                                                            const std::vector<LoadedVideo>&, int, int);
template std::vector<ScoreSeries> score_with_student<double>(StudentModelT<double>&,
                                                             const std::vector<LoadedVideo>&, int, int);
template std::vector<ScoreSeries> score_with_autoencoder<float>(StudentModelT<float>&, DecoderT<float>&,
                                                                const std::vector<LoadedVideo>&, int, int);
template std::vector<ScoreSeries> score_with_autoencoder<double>(StudentModelT<double>&, DecoderT<double>&,
                                                                 const std::vector<LoadedVideo>&, int, int);

}  // namespace vadkd
