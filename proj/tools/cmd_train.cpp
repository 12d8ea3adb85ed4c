#include <cstdio>
#include <fstream>

#include "cli_common.hpp"

namespace sfuda::cli {

namespace {

std::ofstream open_log(const std::filesystem::path& out_dir) {
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw IoError("cannot open train log in " + out_dir.string());
    return log;
}

}  // namespace

int run_pretrain(const TrainArgs& args) {
    RunConfig cfg = load_config_with_seed(args);
    if (!args.source_override.empty()) cfg.source_data = args.source_override;
    if (!args.target_override.empty()) cfg.target_data = args.target_override;
    if (cfg.source_data.empty()) throw ConfigError("pretrain: no source dataset configured");
    ensure_out_dir(args.out_dir);

    const std::vector<AnnotatedPair> source = load_dataset(cfg.source_data);
    std::vector<AnnotatedPair> target_train, target_val;
    const std::vector<AnnotatedPair>* val = nullptr;
    if (!cfg.target_data.empty()) {
        const std::vector<AnnotatedPair> target = load_dataset(cfg.target_data);
        split_dataset(target, cfg.target_val_fraction, target_train, target_val);
        val = &target_val;
    }

    TrainState state;
    state.student = args.init_checkpoint.empty() ? cfg.make_estimator()
                                                 : read_checkpoint(args.init_checkpoint);
    state.teacher = state.student;
    state.seed = cfg.seed;

    std::ofstream log = open_log(args.out_dir);
    run_pretrain(state, source, cfg.pretrain_steps, cfg.adapt_config().sgd, val,
                 cfg.averaging_mode(), cfg.val_interval,
                 [&](const TrainLogRecord& rec) { log << log_record_to_json(rec).dump() << "\n"; });

    write_checkpoint(std::filesystem::path(args.out_dir) / "student.ckpt", state.student);
    write_checkpoint(std::filesystem::path(args.out_dir) / "teacher.ckpt", state.teacher);

    Json inputs;
    inputs["source"] = cfg.source_data;
    inputs["target"] = cfg.target_data;
    inputs["init"] = args.init_checkpoint;
    write_run_manifest(args.out_dir, "pretrain", run_config_to_json(cfg), inputs);

    std::printf("pretrain: %d steps on %zu source pairs, mean L_source %.6f\n", cfg.pretrain_steps,
                source.size(),
                state.step ? state.total_source_loss / double(state.step) : 0.0);
    if (val) {
        const FlowMetrics m = evaluate_model(state.student, *val, cfg.averaging_mode());
        std::printf("pretrain: target val %s\n", format_metrics(m).c_str());
    }
    return 0;
}

int run_adapt(const TrainArgs& args) {
    RunConfig cfg = load_config_with_seed(args);
    if (!args.source_override.empty()) cfg.source_data = args.source_override;
    if (!args.target_override.empty()) cfg.target_data = args.target_override;
    if (cfg.source_data.empty() || cfg.target_data.empty())
        throw ConfigError("adapt: source and target datasets are required");
    ensure_out_dir(args.out_dir);

    const std::vector<AnnotatedPair> source = load_dataset(cfg.source_data);
    const std::vector<AnnotatedPair> target = load_dataset(cfg.target_data);
    std::vector<AnnotatedPair> target_train, target_val;
    split_dataset(target, cfg.target_val_fraction, target_train, target_val);
    if (target_train.empty()) throw ConfigError("adapt: target train split is empty");

    TrainState state;
    state.student = args.init_checkpoint.empty() ? cfg.make_estimator()
                                                 : read_checkpoint(args.init_checkpoint);
    // the teacher starts as a copy of the (pretrained) student; a random
    // teacher would produce meaningless pseudo-labels
    state.teacher = state.student;
    state.seed = cfg.seed;

    const FlowMetrics before = target_val.empty()
                                   ? FlowMetrics{}
                                   : evaluate_model(state.student, target_val, cfg.averaging_mode());

    std::ofstream log = open_log(args.out_dir);
    run_adapt(state, source, target_train, cfg.adapt_steps, cfg.adapt_config(),
              target_val.empty() ? nullptr : &target_val, cfg.averaging_mode(), cfg.val_interval,
              [&](const TrainLogRecord& rec) { log << log_record_to_json(rec).dump() << "\n"; });

    write_checkpoint(std::filesystem::path(args.out_dir) / "student.ckpt", state.student);
    write_checkpoint(std::filesystem::path(args.out_dir) / "teacher.ckpt", state.teacher);

    Json inputs;
    inputs["source"] = cfg.source_data;
    inputs["target"] = cfg.target_data;
    inputs["init"] = args.init_checkpoint;
    write_run_manifest(args.out_dir, "adapt", run_config_to_json(cfg), inputs);

    std::printf("adapt: %d steps (%zu source, %zu target-train pairs)\n", cfg.adapt_steps,
                source.size(), target_train.size());
    if (!target_val.empty()) {
        const FlowMetrics after = evaluate_model(state.student, target_val, cfg.averaging_mode());
        std::printf("adapt: target val before %s\n", format_metrics(before).c_str());
        std::printf("adapt: target val after  %s\n", format_metrics(after).c_str());
    }
    return 0;
}

}  // namespace sfuda::cli
