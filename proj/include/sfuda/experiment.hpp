#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "sfuda/config.hpp"
#include "sfuda/errors.hpp"
#include "sfuda/io.hpp"
#include "sfuda/metrics.hpp"
#include "sfuda/synthgen.hpp"
#include "sfuda/uda.hpp"

namespace sfuda {

// ---------------------------------------------------------------------------
// Dataset directories: one container file per pair plus a manifest recording
// the script, seed and ground entity ids.
// ---------------------------------------------------------------------------

struct DatasetManifest {
    std::string preset;
    std::uint64_t seed = 0;
    std::vector<std::string> pair_files;
    std::vector<std::uint32_t> ground_ids;
};

inline std::string pair_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%04zu.gsf", index);
    return buf;
}

inline void write_dataset_manifest(const std::filesystem::path& dir, const DatasetManifest& m,
                                   const Json& script_echo) {
    Json j;
    j["preset"] = m.preset;
    j["seed"] = m.seed;
    j["pairs"] = m.pair_files;
    j["ground_ids"] = m.ground_ids;
    j["script"] = script_echo;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

inline DatasetManifest read_dataset_manifest(const std::filesystem::path& dir) {
    Json j;
    try {
        j = Json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const Json::exception& e) {
        throw IoError("bad dataset manifest in " + dir.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.preset = j.value("preset", std::string{});
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("pairs"))
        for (const auto& f : j.at("pairs")) m.pair_files.push_back(f.get<std::string>());
    if (j.contains("ground_ids"))
        for (const auto& g : j.at("ground_ids")) m.ground_ids.push_back(g.get<std::uint32_t>());
    return m;
}

inline std::vector<AnnotatedPair> load_dataset(const std::filesystem::path& dir) {
    const DatasetManifest m = read_dataset_manifest(dir);
    std::vector<AnnotatedPair> pairs;
    pairs.reserve(m.pair_files.size());
    for (const std::string& f : m.pair_files) pairs.push_back(read_container(dir / f).to_pair());
    if (pairs.empty()) throw EmptyInput("dataset " + dir.string() + " has no pairs");
    return pairs;
}

/// Generate a dataset directory from a scene script. Pairs are independent
/// scenes seeded from (seed, pair index), so worker parallelism cannot change
/// the output bytes.
inline DatasetManifest generate_dataset(const SceneScript& script, std::uint64_t seed,
                                        const std::filesystem::path& dir, int jobs = 1,
                                        bool emit_ply = false) {
    std::filesystem::create_directories(dir);
    DatasetManifest manifest;
    manifest.preset = script.name;
    manifest.seed = seed;
    manifest.pair_files.resize(std::size_t(script.n_pairs));

    {
        // Ground ids depend only on the script structure; probe pair 0.
        const Scene scene = build_scene(script, mix_seed(seed, 0, 0x424c44ULL));
        manifest.ground_ids = scene.ground_ids;
    }

    std::vector<std::size_t> failures;
    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const AnnotatedPair pair = generate_pair(script, seed, i);
            const std::string name = pair_file_name(i);
            write_container(dir / name, Container::from_pair(pair));
            if (emit_ply) {
                write_ply(dir / (name + ".first.ply"), pair.first, &pair.flow);
                write_ply(dir / (name + ".second.ply"), pair.second);
            }
            manifest.pair_files[i] = name;
        }
    };

    const std::size_t n = std::size_t(script.n_pairs);
    if (jobs <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> threads;
        const std::size_t stride = (n + std::size_t(jobs) - 1) / std::size_t(jobs);
        for (int t = 0; t < jobs; ++t) {
            const std::size_t begin = std::min(n, std::size_t(t) * stride);
            const std::size_t end = std::min(n, begin + stride);
            if (begin < end) threads.emplace_back(worker, begin, end);
        }
        for (std::thread& t : threads) t.join();
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Evaluation and training drivers
// ---------------------------------------------------------------------------

inline FlowMetrics evaluate_model(const EstimatorParams& params,
                                  const std::vector<AnnotatedPair>& pairs, MetricAveraging mode) {
    std::vector<FlowMetrics> per_pair;
    per_pair.reserve(pairs.size());
    for (const AnnotatedPair& pair : pairs) {
        const FlowField pred = predict_flow(params, pair.first, pair.second);
        per_pair.push_back(evaluate(pred, pair.flow));
    }
    return aggregate(per_pair, mode);
}

struct TrainLogRecord {
    std::uint64_t step = 0;
    double l_source = 0.0;
    double l_epc = 0.0;
    double l_stu = 0.0;
    bool has_val = false;
    double val_epe = 0.0;
};

using TrainLogFn = std::function<void(const TrainLogRecord&)>;

// Deterministic pair pick for step s: stateless, cheap, seed-stable.
inline std::size_t pick_index(std::uint64_t seed, std::uint64_t step, std::uint64_t tag,
                              std::size_t n) {
    return std::size_t(mix_seed(seed, step, tag) % std::uint64_t(n));
}

inline void run_pretrain(TrainState& state, const std::vector<AnnotatedPair>& source, int steps,
                         const SgdConfig& sgd, const std::vector<AnnotatedPair>* val,
                         MetricAveraging mode, int val_interval, const TrainLogFn& log) {
    for (int s = 0; s < steps; ++s) {
        const AnnotatedPair& pair = source[pick_index(state.seed, state.step, 0x535243ULL, source.size())];
        const StepStats stats = pretrain_step(
            state, SourceBatch{pair.first, pair.second, pair.flow}, sgd);
        if (log) {
            TrainLogRecord rec;
            rec.step = state.step;
            rec.l_source = stats.l_source;
            rec.l_stu = stats.l_stu;
            if (val && (s + 1 == steps || state.step % std::uint64_t(val_interval) == 0)) {
                rec.has_val = true;
                rec.val_epe = evaluate_model(state.student, *val, mode).epe3d;
            }
            log(rec);
        }
    }
}

inline void run_adapt(TrainState& state, const std::vector<AnnotatedPair>& source,
                      const std::vector<AnnotatedPair>& target, int steps, const AdaptConfig& cfg,
                      const std::vector<AnnotatedPair>* val, MetricAveraging mode, int val_interval,
                      const TrainLogFn& log) {
    for (int s = 0; s < steps; ++s) {
        const AnnotatedPair& sp = source[pick_index(state.seed, state.step, 0x535243ULL, source.size())];
        const AnnotatedPair& tp = target[pick_index(state.seed, state.step, 0x544754ULL, target.size())];
        const StepStats stats = adapt_step(state, SourceBatch{sp.first, sp.second, sp.flow},
                                           TargetBatch{tp.first, tp.second}, cfg);
        if (log) {
            TrainLogRecord rec;
            rec.step = state.step;
            rec.l_source = stats.l_source;
            rec.l_epc = stats.l_epc;
            rec.l_stu = stats.l_stu;
            if (val && (s + 1 == steps || state.step % std::uint64_t(val_interval) == 0)) {
                rec.has_val = true;
                rec.val_epe = evaluate_model(state.student, *val, mode).epe3d;
            }
            log(rec);
        }
    }
}

/// Split a dataset into train/val deterministically: the last
/// ceil(fraction * n) pairs become the validation split.
inline void split_dataset(const std::vector<AnnotatedPair>& all, double val_fraction,
                          std::vector<AnnotatedPair>& train, std::vector<AnnotatedPair>& val) {
    const std::size_t n = all.size();
    std::size_t n_val = std::size_t(std::ceil(val_fraction * double(n)));
    if (n_val >= n) n_val = n > 1 ? n - 1 : 0;
    train.assign(all.begin(), all.end() - std::ptrdiff_t(n_val));
    val.assign(all.end() - std::ptrdiff_t(n_val), all.end());
}

// ---------------------------------------------------------------------------
// Ground-point-removal ablation: raw nearest-neighbor correspondence flow,
// pseudo-label refinement on top, endpoint error against ground truth. The
// removal strategy decides what the clustering and refinement get to see.
// ---------------------------------------------------------------------------

struct GprTrialConfig {
    DbscanConfig dbscan;
    CrConfig cr;
    double height_threshold = 0.3;  // height above ground at the sensor
    MetricAveraging averaging = MetricAveraging::PerPair;
};

/// The removal strategy decides what the clustering and refinement get to
/// see; the endpoint error is always scored on the surviving non-ground
/// points so strategies stay comparable. The height threshold is specified
/// above ground and rebased into the sensor-local frame, where the clouds
/// live.
inline double gpr_refinement_epe(const SceneScript& script, std::uint64_t seed,
                                 GroundRemovalMode mode, const GprTrialConfig& cfg) {
    std::vector<FlowMetrics> per_pair;
    for (int p = 0; p < script.n_pairs; ++p) {
        const Scene scene = build_scene(script, mix_seed(seed, std::uint64_t(p), 0x424c44ULL));
        Rng n0 = make_rng(seed, std::uint64_t(p), 0, 0x4e4f4953ULL);
        Rng n1 = make_rng(seed, std::uint64_t(p), 1, 0x4e4f4953ULL);
        const PointCloud f0 = lidar_scan(scene.entities, 0, scene.sensor.poses[0], script.lidar, n0);
        const PointCloud f1 = lidar_scan(scene.entities, 1, scene.sensor.poses[1], script.lidar, n1);
        const AnnotatedPair raw = annotate_pair(scene.entities, scene.sensor, 0, f0, f1);

        GroundRemoval removal{mode, cfg.height_threshold - script.sensor.height,
                              scene.ground_ids};
        PointCloud first = raw.first;
        PointCloud second = raw.second;
        FlowField gt = raw.flow;
        if (mode != GroundRemovalMode::None) {
            const FilteredCloud kept = remove_ground(raw.first, removal);
            FlowField kept_flow;
            kept_flow.vectors.reserve(kept.index_map.size());
            for (int idx : kept.index_map) kept_flow.vectors.push_back(raw.flow.vectors[idx]);
            first = kept.cloud;
            gt = std::move(kept_flow);
            second = remove_ground(raw.second, removal).cloud;
        }
        if (first.empty() || second.empty()) continue;

        const FlowField raw_flow = nn_baseline_flow(first, second);
        const Clustering clusters = dbscan(first, cfg.dbscan);
        const PseudoLabels pseudo = epc_loss_targets(first, raw_flow, clusters, second, cfg.cr);

        const std::unordered_set<std::uint32_t> ground(scene.ground_ids.begin(),
                                                       scene.ground_ids.end());
        FlowField refined_objects, gt_objects;
        for (std::size_t i = 0; i < first.size(); ++i) {
            if (ground.count(first.labels[i])) continue;
            refined_objects.vectors.push_back(pseudo.points[i] - first.points[i]);
            gt_objects.vectors.push_back(gt.vectors[i]);
        }
        if (refined_objects.size() == 0) continue;
        per_pair.push_back(evaluate(refined_objects, gt_objects));
    }
    if (per_pair.empty()) throw EmptyInput("gpr trial: nothing survived ground removal");
    return aggregate(per_pair, cfg.averaging).epe3d;
}

}  // namespace sfuda
