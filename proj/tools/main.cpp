#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "cli_common.hpp"

namespace {

void add_common(CLI::App* cmd, sfuda::cli::CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Configuration file (JSON)");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--seed", args.seed, "Seed override")->each([&](const std::string&) {
        args.seed_set = true;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-flow domain adaptation toolkit"};
    app.require_subcommand(1);

    sfuda::cli::GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate an annotated dataset from a scene script");
    add_common(gen_cmd, gen);
    gen_cmd->add_option("--jobs", gen.jobs, "Worker threads across pairs");
    gen_cmd->add_flag("--emit-ply", gen.emit_ply, "Also export clouds as ASCII PLY");

    sfuda::cli::TrainArgs pretrain;
    CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "Source-only supervised training");
    add_common(pretrain_cmd, pretrain);
    pretrain_cmd->add_option("--source", pretrain.source_override, "Source dataset directory");
    pretrain_cmd->add_option("--target", pretrain.target_override,
                             "Target dataset directory (validation only)");

    sfuda::cli::TrainArgs adapt;
    CLI::App* adapt_cmd = app.add_subcommand("adapt", "Mean-teacher adaptation on source + target");
    add_common(adapt_cmd, adapt);
    adapt_cmd->add_option("--source", adapt.source_override, "Source dataset directory");
    adapt_cmd->add_option("--target", adapt.target_override, "Target dataset directory");
    adapt_cmd->add_option("--init", adapt.init_checkpoint, "Initial student checkpoint");

    sfuda::cli::RefineArgs refine;
    CLI::App* refine_cmd =
        app.add_subcommand("refine", "Standalone pseudo-label refinement of a pair + flow");
    add_common(refine_cmd, refine);
    refine_cmd->add_option("--input", refine.input, "Container file or dataset directory")
        ->required();
    refine_cmd->add_flag("--emit-ply", refine.emit_ply, "Also export refined clouds as PLY");

    sfuda::cli::EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Scene-flow metrics against ground truth");
    add_common(eval_cmd, eval);
    eval_cmd->add_option("--data", eval.data_dir, "Ground-truth dataset directory")->required();
    eval_cmd->add_option("--pred", eval.pred_dir, "Directory of predicted-flow containers");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Evaluate a model checkpoint instead");

    sfuda::cli::AblateArgs ablate;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Parameter and strategy sweeps");
    add_common(ablate_cmd, ablate);
    ablate_cmd->add_option("--sweep", ablate.sweep, "One of: alpha, k, gpr, transform")->required();
    ablate_cmd->add_option("--scene", ablate.scene_script, "Scene script for the gpr sweep");
    ablate_cmd->add_option("--source", ablate.source_override, "Source dataset directory");
    ablate_cmd->add_option("--target", ablate.target_override, "Target dataset directory");
    ablate_cmd->add_flag("--dry-run", ablate.dry_run, "Print the sweep grid without running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen_cmd->parsed()) return sfuda::cli::run_gen(gen);
        if (pretrain_cmd->parsed()) return sfuda::cli::run_pretrain(pretrain);
        if (adapt_cmd->parsed()) return sfuda::cli::run_adapt(adapt);
        if (refine_cmd->parsed()) return sfuda::cli::run_refine(refine);
        if (eval_cmd->parsed()) return sfuda::cli::run_eval(eval);
        if (ablate_cmd->parsed()) return sfuda::cli::run_ablate(ablate);
    } catch (const sfuda::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const sfuda::InvalidScript& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
