#include <cstdio>
#include <fstream>

#include "cli_common.hpp"

namespace sfuda::cli {

int run_eval(const EvalArgs& args) {
    const RunConfig cfg = load_config_with_seed(args);
    if (args.pred_dir.empty() == args.checkpoint.empty())
        throw ConfigError("eval: exactly one of --pred or --checkpoint is required");
    ensure_out_dir(args.out_dir);

    const std::filesystem::path data_dir(args.data_dir);
    const DatasetManifest manifest = read_dataset_manifest(data_dir);
    if (manifest.pair_files.empty()) throw EmptyInput("eval: dataset has no pairs");

    EstimatorParams params;
    const bool use_model = !args.checkpoint.empty();
    if (use_model) params = read_checkpoint(args.checkpoint);

    std::ofstream per_pair_log(std::filesystem::path(args.out_dir) / "metrics.jsonl",
                               std::ios::trunc);
    if (!per_pair_log) throw IoError("eval: cannot open metrics log");

    std::vector<FlowMetrics> per_pair;
    for (const std::string& name : manifest.pair_files) {
        const AnnotatedPair gt_pair = read_container(data_dir / name).to_pair();
        FlowField pred;
        if (use_model) {
            pred = predict_flow(params, gt_pair.first, gt_pair.second);
        } else {
            const Container c = read_container(std::filesystem::path(args.pred_dir) / name);
            if (!c.has_flow) throw IoError("eval: prediction file " + name + " has no FLOW section");
            pred.vectors = c.flow;
        }
        const FlowMetrics m = evaluate(pred, gt_pair.flow);
        per_pair.push_back(m);
        Json rec = metrics_to_json(m);
        rec["pair"] = name;
        per_pair_log << rec.dump() << "\n";
    }

    const FlowMetrics agg = aggregate(per_pair, cfg.averaging_mode());
    Json summary = metrics_to_json(agg);
    summary["averaging"] = cfg.metric_averaging;
    summary["pairs"] = per_pair.size();
    {
        std::ofstream f(std::filesystem::path(args.out_dir) / "metrics.json", std::ios::trunc);
        f << summary.dump(2) << "\n";
    }

    Json inputs;
    inputs["data"] = args.data_dir;
    inputs["pred"] = args.pred_dir;
    inputs["checkpoint"] = args.checkpoint;
    write_run_manifest(args.out_dir, "eval", run_config_to_json(cfg), inputs);

    std::printf("eval: %zu pairs (%s averaging): %s\n", per_pair.size(),
                cfg.metric_averaging.c_str(), format_metrics(agg).c_str());
    return 0;
}

}  // namespace sfuda::cli
