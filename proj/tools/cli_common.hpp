#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "sfuda/sfuda.hpp"

namespace sfuda::cli {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct GenArgs : CommonArgs {
    int jobs = 1;
    bool emit_ply = false;
};

struct TrainArgs : CommonArgs {
    std::string source_override;
    std::string target_override;
    std::string init_checkpoint;
};

struct RefineArgs : CommonArgs {
    std::string input;  // container file or dataset directory
    bool emit_ply = false;
};

struct EvalArgs : CommonArgs {
    std::string data_dir;
    std::string pred_dir;
    std::string checkpoint;
};

struct AblateArgs : CommonArgs {
    std::string sweep;  // alpha | k | gpr | transform
    std::string scene_script;
    std::string source_override;
    std::string target_override;
    bool dry_run = false;
};

int run_gen(const GenArgs& args);
int run_pretrain(const TrainArgs& args);
int run_adapt(const TrainArgs& args);
int run_refine(const RefineArgs& args);
int run_eval(const EvalArgs& args);
int run_ablate(const AblateArgs& args);

inline RunConfig load_config_with_seed(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_run_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

inline void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ConfigError("--out is required");
    std::filesystem::create_directories(out);
}

/// Every run drops a manifest with the resolved configuration and seeds so
/// it can be reproduced bit-exactly. No clocks, no hostnames.
inline void write_run_manifest(const std::filesystem::path& out_dir, const std::string& command,
                               const Json& resolved_config, const Json& inputs) {
    Json j;
    j["command"] = command;
    j["config"] = resolved_config;
    j["inputs"] = inputs;
    std::ofstream f(out_dir / "run_manifest.json", std::ios::trunc);
    if (!f) throw IoError("cannot write run manifest in " + out_dir.string());
    f << j.dump(2) << "\n";
}

inline std::string format_metrics(const FlowMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "EPE %.6f  AS %.2f%%  AR %.2f%%  Out %.2f%%  (%zu points)",
                  m.epe3d, m.acc_strict, m.acc_relax, m.outliers, m.point_count);
    return buf;
}

inline Json metrics_to_json(const FlowMetrics& m) {
    return Json{{"epe3d", m.epe3d},
                {"acc_strict", m.acc_strict},
                {"acc_relax", m.acc_relax},
                {"outliers", m.outliers},
                {"point_count", m.point_count}};
}

inline Json log_record_to_json(const TrainLogRecord& rec) {
    Json j;
    j["step"] = rec.step;
    j["l_source"] = rec.l_source;
    j["l_epc"] = rec.l_epc;
    j["l_stu"] = rec.l_stu;
    if (rec.has_val)
        j["val_epe"] = rec.val_epe;
    else
        j["val_epe"] = nullptr;
    return j;
}

}  // namespace sfuda::cli
