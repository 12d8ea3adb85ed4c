#include <cstdio>

#include "cli_common.hpp"

namespace sfuda::cli {

namespace {

struct RefineStats {
    int clusters = 0;
    int degenerate = 0;
    std::size_t noise_points = 0;
};

// DR + CR on one pair: clusters come from the (optionally ground-filtered)
// first frame; the output flow is P_pseudo - P_t^1 on the surviving points.
Container refine_one(const AnnotatedPair& pair, const RunConfig& cfg,
                     const std::vector<std::uint32_t>& ground_ids, RefineStats& stats) {
    GroundRemoval removal;
    removal.mode = cfg.ground_removal;
    removal.height_threshold = cfg.height_threshold;
    removal.ground_ids = ground_ids;

    PointCloud first = pair.first;
    PointCloud second = pair.second;
    FlowField flow = pair.flow;
    if (cfg.ground_removal != GroundRemovalMode::None) {
        const FilteredCloud f = remove_ground(pair.first, removal);
        FlowField kept;
        kept.vectors.reserve(f.index_map.size());
        for (int idx : f.index_map) kept.vectors.push_back(pair.flow.vectors[idx]);
        first = f.cloud;
        flow = std::move(kept);
        second = remove_ground(pair.second, removal).cloud;
    }
    if (first.empty() || second.empty())
        throw EmptyInput("refine: no points left after ground removal");

    const Clustering clusters = dbscan(first, DbscanConfig{cfg.dbscan_epsilon, cfg.dbscan_min_points});
    const WarpedCloud warped = warp(first, flow);
    const DrResult dr = deformation_regularize(first, warped, clusters);
    const PseudoLabels pseudo = correspondence_refine(dr, clusters, second, CrConfig{cfg.cr_k});

    stats.clusters = clusters.cluster_count;
    stats.degenerate = dr.degenerate_clusters;
    for (std::size_t i = 0; i < first.size(); ++i)
        if (clusters.is_noise(i)) ++stats.noise_points;

    Container out;
    out.pts1 = first.points;
    out.pts2 = second.points;
    out.has_pts2 = true;
    out.flow.resize(first.size());
    for (std::size_t i = 0; i < first.size(); ++i)
        out.flow[i] = pseudo.points[i] - first.points[i];
    out.has_flow = true;
    if (first.has_labels()) {
        out.labels1 = first.labels;
        out.has_labels1 = true;
    }
    return out;
}

}  // namespace

int run_refine(const RefineArgs& args) {
    const RunConfig cfg = load_config_with_seed(args);
    ensure_out_dir(args.out_dir);

    std::vector<std::pair<std::string, AnnotatedPair>> inputs;
    std::vector<std::uint32_t> ground_ids;
    const std::filesystem::path in_path(args.input);
    if (std::filesystem::is_directory(in_path)) {
        const DatasetManifest manifest = read_dataset_manifest(in_path);
        ground_ids = manifest.ground_ids;
        for (const std::string& f : manifest.pair_files)
            inputs.emplace_back(f, read_container(in_path / f).to_pair());
    } else {
        inputs.emplace_back(in_path.filename().string(), read_container(in_path).to_pair());
    }

    for (const auto& [name, pair] : inputs) {
        RefineStats stats;
        const Container refined = refine_one(pair, cfg, ground_ids, stats);
        const std::filesystem::path out_file = std::filesystem::path(args.out_dir) / name;
        write_container(out_file, refined);
        if (args.emit_ply) {
            PointCloud pseudo;
            pseudo.points.resize(refined.pts1.size());
            for (std::size_t i = 0; i < refined.pts1.size(); ++i)
                pseudo.points[i] = refined.pts1[i] + refined.flow[i];
            write_ply(out_file.string() + ".pseudo.ply", pseudo);
        }
        std::printf("refine: %s -> %d clusters (%d degenerate), %zu noise points\n", name.c_str(),
                    stats.clusters, stats.degenerate, stats.noise_points);
    }

    Json manifest_inputs;
    manifest_inputs["input"] = args.input;
    manifest_inputs["pairs"] = inputs.size();
    write_run_manifest(args.out_dir, "refine", run_config_to_json(cfg), manifest_inputs);
    return 0;
}

}  // namespace sfuda::cli
