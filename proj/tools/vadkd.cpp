#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vadkd/pipeline.hpp"

namespace {

// Exit codes: 1 usage, 2 config, 3 runtime. Reasons go to stderr as a single
// machine-parsable line.
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int fail(int code, const std::string& reason) {
    std::fprintf(stderr, "error: code=%d reason=\"%s\"\n", code, reason.c_str());
    return code;
}

struct CommonArgs {
    std::string config_path;
    int64_t seed_override = -1;
    std::string out_override;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--seed", args.seed_override, "override train.seed");
    cmd->add_option("--out", args.out_override, "override paths.out_dir");
}

vadkd::RunConfig load(const CommonArgs& args) {
    vadkd::RunConfig cfg = vadkd::load_run_config(args.config_path);
    if (args.seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(args.seed_override);
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frame-level video anomaly detection via multi-teacher adversarial distillation"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, dis_args, eval_args, bench_args, ablate_args;

    auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
    add_common(gen, gen_args);

    auto* pretrain = app.add_subcommand("pretrain", "phase 1: reconstruction pre-training");
    add_common(pretrain, pre_args);

    auto* distill = app.add_subcommand("distill", "phase 2: joint standard + adversarial distillation");
    add_common(distill, dis_args);

    auto* eval = app.add_subcommand("eval", "frame-level AUC evaluation of the test split");
    add_common(eval, eval_args);
    std::string eval_source = "student";
    int eval_teacher = 0;
    eval->add_option("--source", eval_source, "score source: student | oracle | ae")
        ->check(CLI::IsMember({"student", "oracle", "ae"}));
    eval->add_option("--teacher", eval_teacher, "teacher index for --source oracle");

    auto* bench = app.add_subcommand("bench", "eval-mode throughput benchmark");
    add_common(bench, bench_args);
    vadkd::BenchCommandOptions bench_opts;
    bench->add_option("--warmup", bench_opts.options.warmup_frames, "warmup frames (min 100)");
    bench->add_option("--frames", bench_opts.options.measured_frames, "measured frames (min 2000)");
    bench->add_option("--reps", bench_opts.options.repetitions, "repetitions (min 5)");
    bench->add_option("--batch", bench_opts.options.batch, "sequences per forward");
    bench->add_option("--replicas", bench_opts.options.replicas, "parallel workers on a shared model");
    bench->add_flag("--dense", bench_opts.include_dense, "also bench the dense-FFN twin");
    bench->add_option("--m-sweep", bench_opts.m_sweep, "additional transformer depths to bench");

    auto* ablate = app.add_subcommand("ablate", "train/evaluate ablation variants");
    add_common(ablate, ablate_args);
    std::vector<std::string> axes;
    ablate->add_option("--axes", axes, "axes: losses teachers alpha heads frames ffn")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "error: code=%d reason=\"%s\"\n", kExitUsage, e.what());
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            vadkd::run_gen(load(gen_args));
        } else if (pretrain->parsed()) {
            vadkd::run_pretrain(load(pre_args));
        } else if (distill->parsed()) {
            vadkd::run_distill(load(dis_args));
        } else if (eval->parsed()) {
            const vadkd::EvalSource source = eval_source == "student" ? vadkd::EvalSource::student
                                             : eval_source == "oracle" ? vadkd::EvalSource::oracle
                                                                       : vadkd::EvalSource::ae;
            const auto outcome = vadkd::run_eval(load(eval_args), source, eval_teacher);
            std::printf("micro,%s\nmacro,%s\n", vadkd::format_double(outcome.micro).c_str(),
                        vadkd::format_double(outcome.macro).c_str());
        } else if (bench->parsed()) {
            // The benchmark contract: at least 100 warmup and 2000 measured
            // frames, median of at least 5 repetitions.
            bench_opts.options.warmup_frames = std::max(bench_opts.options.warmup_frames, 100);
            bench_opts.options.measured_frames = std::max(bench_opts.options.measured_frames, 2000);
            bench_opts.options.repetitions = std::max(bench_opts.options.repetitions, 5);
            const auto cfg = load(bench_args);
            bench_opts.options.seed = cfg.train.seed;
            const auto reports = vadkd::run_bench_cmd(cfg, bench_opts);
            for (const auto& r : reports)
                std::printf("%s,%s\n", r.variant.c_str(), vadkd::format_double(r.fps).c_str());
        } else if (ablate->parsed()) {
            const auto rows = vadkd::run_ablate(load(ablate_args), axes);
            for (const auto& row : rows)
                std::printf("%s,%s,%s,%s\n", row.axis.c_str(), row.config.c_str(),
                            vadkd::format_double(row.micro).c_str(), vadkd::format_double(row.macro).c_str());
        }
    } catch (const vadkd::ConfigError& e) {
        return fail(kExitConfig, e.what());
    } catch (const std::exception& e) {
        return fail(kExitRuntime, e.what());
    }
    return 0;
}
