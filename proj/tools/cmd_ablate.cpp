#include <cmath>
#include <cstdio>
#include <fstream>

#include "cli_common.hpp"

namespace sfuda::cli {

namespace {

std::vector<double> alpha_grid(const RunConfig& cfg) {
    std::vector<double> out;
    for (double a = cfg.ablate_alpha_min; a <= cfg.ablate_alpha_max + 1e-12;
         a += cfg.ablate_alpha_step)
        out.push_back(std::round(a * 1000.0) / 1000.0);
    return out;
}

std::vector<int> k_grid(const RunConfig& cfg) {
    std::vector<int> out;
    for (int k = cfg.ablate_k_min; k <= cfg.ablate_k_max; ++k) out.push_back(k);
    return out;
}

struct SweepData {
    std::vector<AnnotatedPair> source;
    std::vector<AnnotatedPair> target_train;
    std::vector<AnnotatedPair> target_val;
};

SweepData load_sweep_data(const RunConfig& cfg) {
    SweepData d;
    if (cfg.source_data.empty() || cfg.target_data.empty())
        throw ConfigError("ablate: source and target datasets are required for this sweep");
    d.source = load_dataset(cfg.source_data);
    const std::vector<AnnotatedPair> target = load_dataset(cfg.target_data);
    split_dataset(target, cfg.target_val_fraction, d.target_train, d.target_val);
    if (d.target_train.empty() || d.target_val.empty())
        throw ConfigError("ablate: target split too small");
    return d;
}

// Short pretrain + adapt with one knob overridden; returns held-out EPE.
double run_trial(const RunConfig& base, const SweepData& data, const AdaptConfig& adapt_cfg) {
    TrainState state;
    state.student = base.make_estimator();
    state.teacher = state.student;
    state.seed = base.seed;
    run_pretrain(state, data.source, base.ablate_steps, adapt_cfg.sgd, nullptr,
                 base.averaging_mode(), base.val_interval, nullptr);
    state.teacher = state.student;
    run_adapt(state, data.source, data.target_train, base.ablate_steps, adapt_cfg, nullptr,
              base.averaging_mode(), base.val_interval, nullptr);
    return evaluate_model(state.student, data.target_val, base.averaging_mode()).epe3d;
}

GprTrialConfig gpr_config(const RunConfig& cfg) {
    GprTrialConfig out;
    out.dbscan = DbscanConfig{cfg.dbscan_epsilon, cfg.dbscan_min_points};
    out.cr = CrConfig{cfg.cr_k};
    out.height_threshold = cfg.height_threshold;
    out.averaging = cfg.averaging_mode();
    return out;
}

void emit_table(const std::filesystem::path& out_dir, const std::string& sweep,
                const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream csv(out_dir / ("ablate_" + sweep + ".csv"), std::ios::trunc);
    csv << sweep << ",epe3d\n";
    std::printf("%-12s %s\n", sweep.c_str(), "EPE3D");
    for (const auto& [key, epe] : rows) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", epe);
        csv << key << "," << buf << "\n";
        std::printf("%-12s %s\n", key.c_str(), buf);
    }
}

}  // namespace

int run_ablate(const AblateArgs& args) {
    RunConfig cfg = load_config_with_seed(args);
    if (!args.source_override.empty()) cfg.source_data = args.source_override;
    if (!args.target_override.empty()) cfg.target_data = args.target_override;

    if (args.dry_run) {
        if (args.sweep == "alpha") {
            for (double a : alpha_grid(cfg)) std::printf("alpha %.3f\n", a);
        } else if (args.sweep == "k") {
            for (int k : k_grid(cfg)) std::printf("K %d\n", k);
        } else if (args.sweep == "gpr") {
            std::printf("gpr none\ngpr by_height\ngpr by_entity\n");
        } else if (args.sweep == "transform") {
            std::printf("transform asymmetric\ntransform symmetric\n");
        } else {
            throw ConfigError("ablate: unknown sweep '" + args.sweep + "'");
        }
        return 0;
    }
    ensure_out_dir(args.out_dir);

    std::vector<std::pair<std::string, double>> rows;
    if (args.sweep == "alpha") {
        const SweepData data = load_sweep_data(cfg);
        for (double a : alpha_grid(cfg)) {
            AdaptConfig trial = cfg.adapt_config();
            trial.ema.alpha = a;
            char key[32];
            std::snprintf(key, sizeof key, "%.3f", a);
            rows.emplace_back(key, run_trial(cfg, data, trial));
        }
    } else if (args.sweep == "k") {
        const SweepData data = load_sweep_data(cfg);
        for (int k : k_grid(cfg)) {
            AdaptConfig trial = cfg.adapt_config();
            trial.cr.k_neighbors = k;
            rows.emplace_back(std::to_string(k), run_trial(cfg, data, trial));
        }
    } else if (args.sweep == "transform") {
        const SweepData data = load_sweep_data(cfg);
        for (const char* mode : {"asymmetric", "symmetric"}) {
            AdaptConfig trial = cfg.adapt_config();
            trial.transform_mode =
                std::string(mode) == "asymmetric" ? TransformMode::Asymmetric : TransformMode::Symmetric;
            rows.emplace_back(mode, run_trial(cfg, data, trial));
        }
    } else if (args.sweep == "gpr") {
        if (args.scene_script.empty())
            throw ConfigError("ablate gpr: --scene scene script is required");
        SceneScript script = load_scene_script(args.scene_script);
        script.preprocess.ground_removal = GroundRemovalMode::None;  // strategies applied here
        const std::uint64_t seed = args.seed_set ? args.seed : cfg.seed;
        const GprTrialConfig trial = gpr_config(cfg);
        rows.emplace_back("none", gpr_refinement_epe(script, seed, GroundRemovalMode::None, trial));
        rows.emplace_back("by_height",
                          gpr_refinement_epe(script, seed, GroundRemovalMode::ByHeight, trial));
        rows.emplace_back("by_entity",
                          gpr_refinement_epe(script, seed, GroundRemovalMode::ByEntity, trial));
    } else {
        throw ConfigError("ablate: unknown sweep '" + args.sweep + "'");
    }

    emit_table(args.out_dir, args.sweep, rows);

    Json inputs;
    inputs["sweep"] = args.sweep;
    inputs["scene"] = args.scene_script;
    inputs["source"] = cfg.source_data;
    inputs["target"] = cfg.target_data;
    write_run_manifest(args.out_dir, "ablate", run_config_to_json(cfg), inputs);
    return 0;
}

}  // namespace sfuda::cli
