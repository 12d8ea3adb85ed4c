#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfuda/errors.hpp"
#include "sfuda/metrics.hpp"
#include "sfuda/synthgen.hpp"
#include "sfuda/uda.hpp"

namespace sfuda {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(std::string("bad value for key '") + key + "'");
    }
}

inline Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ConfigError("parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene script JSON
// ---------------------------------------------------------------------------

inline GroundRemovalMode ground_removal_from_string(const std::string& s) {
    if (s == "none") return GroundRemovalMode::None;
    if (s == "by_height") return GroundRemovalMode::ByHeight;
    if (s == "by_entity") return GroundRemovalMode::ByEntity;
    throw ConfigError("unknown ground_removal mode '" + s + "'");
}

inline std::string to_string(GroundRemovalMode mode) {
    switch (mode) {
        case GroundRemovalMode::None: return "none";
        case GroundRemovalMode::ByHeight: return "by_height";
        case GroundRemovalMode::ByEntity: return "by_entity";
    }
    return "none";
}

inline SceneScript scene_script_from_json(const Json& j) {
    detail::check_keys(j, "scene script",
                       {"name", "n_pairs", "frame_count", "dt", "surface_spacing", "lidar", "ground",
                        "props", "vehicles", "sensor", "preprocess"});
    SceneScript s;
    s.name = detail::get_or<std::string>(j, "name", s.name);
    s.n_pairs = detail::get_or(j, "n_pairs", s.n_pairs);
    s.frame_count = detail::get_or(j, "frame_count", s.frame_count);
    s.dt = detail::get_or(j, "dt", s.dt);
    s.surface_spacing = detail::get_or(j, "surface_spacing", s.surface_spacing);

    if (j.contains("lidar")) {
        const Json& l = j.at("lidar");
        detail::check_keys(l, "lidar",
                           {"azimuth_count", "elevation_count", "elevation_min_deg",
                            "elevation_max_deg", "min_range", "max_range", "range_noise_sigma"});
        s.lidar.azimuth_count = detail::get_or(l, "azimuth_count", s.lidar.azimuth_count);
        s.lidar.elevation_count = detail::get_or(l, "elevation_count", s.lidar.elevation_count);
        s.lidar.elevation_min =
            detail::get_or(l, "elevation_min_deg", s.lidar.elevation_min * 180.0 / M_PI) * M_PI / 180.0;
        s.lidar.elevation_max =
            detail::get_or(l, "elevation_max_deg", s.lidar.elevation_max * 180.0 / M_PI) * M_PI / 180.0;
        s.lidar.min_range = detail::get_or(l, "min_range", s.lidar.min_range);
        s.lidar.max_range = detail::get_or(l, "max_range", s.lidar.max_range);
        s.lidar.range_noise_sigma = detail::get_or(l, "range_noise_sigma", s.lidar.range_noise_sigma);
    }
    if (j.contains("ground")) {
        const Json& g = j.at("ground");
        detail::check_keys(g, "ground", {"present", "extent", "spacing", "slope"});
        s.ground.present = detail::get_or(g, "present", s.ground.present);
        s.ground.extent = detail::get_or(g, "extent", s.ground.extent);
        s.ground.spacing = detail::get_or(g, "spacing", s.ground.spacing);
        s.ground.slope = detail::get_or(g, "slope", s.ground.slope);
    }
    if (j.contains("props")) {
        const Json& p = j.at("props");
        detail::check_keys(p, "props",
                           {"count", "size_min", "size_max", "radius_min", "radius_max",
                            "sphere_fraction"});
        s.props.count = detail::get_or(p, "count", s.props.count);
        s.props.size_min = detail::get_or(p, "size_min", s.props.size_min);
        s.props.size_max = detail::get_or(p, "size_max", s.props.size_max);
        s.props.radius_min = detail::get_or(p, "radius_min", s.props.radius_min);
        s.props.radius_max = detail::get_or(p, "radius_max", s.props.radius_max);
        s.props.sphere_fraction = detail::get_or(p, "sphere_fraction", s.props.sphere_fraction);
    }
    if (j.contains("vehicles")) {
        const Json& v = j.at("vehicles");
        detail::check_keys(v, "vehicles",
                           {"count", "length", "width", "height", "speed_min", "speed_max",
                            "yaw_rate_max", "radius_min", "radius_max"});
        s.vehicles.count = detail::get_or(v, "count", s.vehicles.count);
        s.vehicles.length = detail::get_or(v, "length", s.vehicles.length);
        s.vehicles.width = detail::get_or(v, "width", s.vehicles.width);
        s.vehicles.height = detail::get_or(v, "height", s.vehicles.height);
        s.vehicles.speed_min = detail::get_or(v, "speed_min", s.vehicles.speed_min);
        s.vehicles.speed_max = detail::get_or(v, "speed_max", s.vehicles.speed_max);
        s.vehicles.yaw_rate_max = detail::get_or(v, "yaw_rate_max", s.vehicles.yaw_rate_max);
        s.vehicles.radius_min = detail::get_or(v, "radius_min", s.vehicles.radius_min);
        s.vehicles.radius_max = detail::get_or(v, "radius_max", s.vehicles.radius_max);
    }
    if (j.contains("sensor")) {
        const Json& sn = j.at("sensor");
        detail::check_keys(sn, "sensor",
                           {"height", "speed", "heading_deg", "yaw_rate", "climb_rate",
                            "climb_jitter"});
        s.sensor.height = detail::get_or(sn, "height", s.sensor.height);
        s.sensor.speed = detail::get_or(sn, "speed", s.sensor.speed);
        s.sensor.heading = detail::get_or(sn, "heading_deg", s.sensor.heading * 180.0 / M_PI) * M_PI / 180.0;
        s.sensor.yaw_rate = detail::get_or(sn, "yaw_rate", s.sensor.yaw_rate);
        s.sensor.climb_rate = detail::get_or(sn, "climb_rate", s.sensor.climb_rate);
        s.sensor.climb_jitter = detail::get_or(sn, "climb_jitter", s.sensor.climb_jitter);
    }
    if (j.contains("preprocess")) {
        const Json& pp = j.at("preprocess");
        detail::check_keys(pp, "preprocess",
                           {"ground_removal", "height_threshold", "max_range", "subsample"});
        s.preprocess.ground_removal = ground_removal_from_string(detail::get_or<std::string>(
            pp, "ground_removal", to_string(s.preprocess.ground_removal)));
        s.preprocess.height_threshold =
            detail::get_or(pp, "height_threshold", s.preprocess.height_threshold);
        s.preprocess.max_range = detail::get_or(pp, "max_range", s.preprocess.max_range);
        s.preprocess.subsample = detail::get_or(pp, "subsample", s.preprocess.subsample);
    }
    s.validate();
    return s;
}

inline SceneScript load_scene_script(const std::filesystem::path& path) {
    return scene_script_from_json(detail::load_json(path));
}

inline Json scene_script_to_json(const SceneScript& s) {
    Json j;
    j["name"] = s.name;
    j["n_pairs"] = s.n_pairs;
    j["frame_count"] = s.frame_count;
    j["dt"] = s.dt;
    j["surface_spacing"] = s.surface_spacing;
    j["lidar"] = {{"azimuth_count", s.lidar.azimuth_count},
                  {"elevation_count", s.lidar.elevation_count},
                  {"elevation_min_deg", s.lidar.elevation_min * 180.0 / M_PI},
                  {"elevation_max_deg", s.lidar.elevation_max * 180.0 / M_PI},
                  {"min_range", s.lidar.min_range},
                  {"max_range", s.lidar.max_range},
                  {"range_noise_sigma", s.lidar.range_noise_sigma}};
    j["ground"] = {{"present", s.ground.present},
                   {"extent", s.ground.extent},
                   {"spacing", s.ground.spacing},
                   {"slope", s.ground.slope}};
    j["props"] = {{"count", s.props.count},
                  {"size_min", s.props.size_min},
                  {"size_max", s.props.size_max},
                  {"radius_min", s.props.radius_min},
                  {"radius_max", s.props.radius_max},
                  {"sphere_fraction", s.props.sphere_fraction}};
    j["vehicles"] = {{"count", s.vehicles.count},
                     {"length", s.vehicles.length},
                     {"width", s.vehicles.width},
                     {"height", s.vehicles.height},
                     {"speed_min", s.vehicles.speed_min},
                     {"speed_max", s.vehicles.speed_max},
                     {"yaw_rate_max", s.vehicles.yaw_rate_max},
                     {"radius_min", s.vehicles.radius_min},
                     {"radius_max", s.vehicles.radius_max}};
    j["sensor"] = {{"height", s.sensor.height},
                   {"speed", s.sensor.speed},
                   {"heading_deg", s.sensor.heading * 180.0 / M_PI},
                   {"yaw_rate", s.sensor.yaw_rate},
                   {"climb_rate", s.sensor.climb_rate},
                   {"climb_jitter", s.sensor.climb_jitter}};
    j["preprocess"] = {{"ground_removal", to_string(s.preprocess.ground_removal)},
                       {"height_threshold", s.preprocess.height_threshold},
                       {"max_range", s.preprocess.max_range},
                       {"subsample", s.preprocess.subsample}};
    return j;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::uint64_t seed = 7;

    // adaptation loop
    double ema_alpha = 0.999;
    int cr_k = 6;
    double dbscan_epsilon = 0.5;
    int dbscan_min_points = 8;
    double rotation_range_deg = 15.0;
    double learning_rate = 0.05;
    double grad_clip = 10.0;
    int pretrain_steps = 300;
    int adapt_steps = 500;
    int val_interval = 25;
    std::string transform_mode = "asymmetric";  // or "symmetric"
    std::string pseudo_frame = "reconciled";    // or "literal"

    // estimator
    int estimator_dim = 8;
    int candidate_k = 16;
    double tau_init = 1.0;
    double embed_scale = 1.0;

    // extra ground removal applied by refine/ablate; datasets from `gen`
    // normally arrive already filtered, so the default is off
    GroundRemovalMode ground_removal = GroundRemovalMode::None;
    double height_threshold = 0.3;

    // data
    std::string source_data;
    std::string target_data;
    double target_val_fraction = 0.25;

    // evaluation
    std::string metric_averaging = "per_pair";  // or "pooled"

    // ablation sweeps (supplementary ranges)
    double ablate_alpha_min = 0.990, ablate_alpha_max = 0.999, ablate_alpha_step = 0.001;
    int ablate_k_min = 3, ablate_k_max = 18;
    int ablate_steps = 120;

    MetricAveraging averaging_mode() const {
        if (metric_averaging == "per_pair") return MetricAveraging::PerPair;
        if (metric_averaging == "pooled") return MetricAveraging::Pooled;
        throw ConfigError("metric_averaging must be 'per_pair' or 'pooled'");
    }

    AdaptConfig adapt_config() const {
        AdaptConfig cfg;
        cfg.ema.alpha = ema_alpha;
        cfg.cr.k_neighbors = cr_k;
        cfg.dbscan.epsilon = dbscan_epsilon;
        cfg.dbscan.min_points = dbscan_min_points;
        cfg.sgd.learning_rate = learning_rate;
        cfg.sgd.clip_norm = grad_clip;
        cfg.rotation_range = rotation_range_deg * M_PI / 180.0;
        if (transform_mode == "asymmetric")
            cfg.transform_mode = TransformMode::Asymmetric;
        else if (transform_mode == "symmetric")
            cfg.transform_mode = TransformMode::Symmetric;
        else
            throw ConfigError("transform_mode must be 'asymmetric' or 'symmetric'");
        if (pseudo_frame == "reconciled")
            cfg.pseudo_frame = PseudoFrame::Reconciled;
        else if (pseudo_frame == "literal")
            cfg.pseudo_frame = PseudoFrame::Literal;
        else
            throw ConfigError("pseudo_frame must be 'reconciled' or 'literal'");
        return cfg;
    }

    EstimatorParams make_estimator() const {
        return EstimatorParams::make(estimator_dim, candidate_k, tau_init, embed_scale);
    }

    void validate() const {
        if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw ConfigError("ema_alpha outside [0,1]");
        if (cr_k < 1) throw ConfigError("cr_k must be >= 1");
        if (dbscan_epsilon <= 0.0 || dbscan_min_points < 1) throw ConfigError("bad dbscan settings");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (pretrain_steps < 0 || adapt_steps < 0) throw ConfigError("negative step counts");
        if (val_interval < 1) throw ConfigError("val_interval must be >= 1");
        if (target_val_fraction < 0.0 || target_val_fraction >= 1.0)
            throw ConfigError("target_val_fraction outside [0,1)");
        if (ablate_alpha_step <= 0.0 || ablate_alpha_max < ablate_alpha_min)
            throw ConfigError("bad ablate alpha range");
        if (ablate_k_max < ablate_k_min || ablate_k_min < 1) throw ConfigError("bad ablate K range");
        (void)averaging_mode();
        (void)adapt_config();
    }
};

inline RunConfig run_config_from_json(const Json& j) {
    detail::check_keys(j, "run config",
                       {"seed", "ema_alpha", "cr_k", "dbscan_epsilon", "dbscan_min_points",
                        "rotation_range_deg", "learning_rate", "grad_clip", "pretrain_steps",
                        "adapt_steps", "val_interval", "transform_mode", "pseudo_frame", "estimator",
                        "preprocess", "data", "metric_averaging", "ablate"});
    RunConfig c;
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    c.ema_alpha = detail::get_or(j, "ema_alpha", c.ema_alpha);
    c.cr_k = detail::get_or(j, "cr_k", c.cr_k);
    c.dbscan_epsilon = detail::get_or(j, "dbscan_epsilon", c.dbscan_epsilon);
    c.dbscan_min_points = detail::get_or(j, "dbscan_min_points", c.dbscan_min_points);
    c.rotation_range_deg = detail::get_or(j, "rotation_range_deg", c.rotation_range_deg);
    c.learning_rate = detail::get_or(j, "learning_rate", c.learning_rate);
    c.grad_clip = detail::get_or(j, "grad_clip", c.grad_clip);
    c.pretrain_steps = detail::get_or(j, "pretrain_steps", c.pretrain_steps);
    c.adapt_steps = detail::get_or(j, "adapt_steps", c.adapt_steps);
    c.val_interval = detail::get_or(j, "val_interval", c.val_interval);
    c.transform_mode = detail::get_or<std::string>(j, "transform_mode", c.transform_mode);
    c.pseudo_frame = detail::get_or<std::string>(j, "pseudo_frame", c.pseudo_frame);
    c.metric_averaging = detail::get_or<std::string>(j, "metric_averaging", c.metric_averaging);

    if (j.contains("estimator")) {
        const Json& e = j.at("estimator");
        detail::check_keys(e, "estimator", {"dim", "candidate_k", "tau_init", "embed_scale"});
        c.estimator_dim = detail::get_or(e, "dim", c.estimator_dim);
        c.candidate_k = detail::get_or(e, "candidate_k", c.candidate_k);
        c.tau_init = detail::get_or(e, "tau_init", c.tau_init);
        c.embed_scale = detail::get_or(e, "embed_scale", c.embed_scale);
    }
    if (j.contains("preprocess")) {
        const Json& p = j.at("preprocess");
        detail::check_keys(p, "preprocess", {"ground_removal", "height_threshold"});
        c.ground_removal = ground_removal_from_string(
            detail::get_or<std::string>(p, "ground_removal", to_string(c.ground_removal)));
        c.height_threshold = detail::get_or(p, "height_threshold", c.height_threshold);
    }
    if (j.contains("data")) {
        const Json& d = j.at("data");
        detail::check_keys(d, "data", {"source", "target", "target_val_fraction"});
        c.source_data = detail::get_or<std::string>(d, "source", c.source_data);
        c.target_data = detail::get_or<std::string>(d, "target", c.target_data);
        c.target_val_fraction = detail::get_or(d, "target_val_fraction", c.target_val_fraction);
    }
    if (j.contains("ablate")) {
        const Json& a = j.at("ablate");
        detail::check_keys(a, "ablate",
                           {"alpha_min", "alpha_max", "alpha_step", "k_min", "k_max", "steps"});
        c.ablate_alpha_min = detail::get_or(a, "alpha_min", c.ablate_alpha_min);
        c.ablate_alpha_max = detail::get_or(a, "alpha_max", c.ablate_alpha_max);
        c.ablate_alpha_step = detail::get_or(a, "alpha_step", c.ablate_alpha_step);
        c.ablate_k_min = detail::get_or(a, "k_min", c.ablate_k_min);
        c.ablate_k_max = detail::get_or(a, "k_max", c.ablate_k_max);
        c.ablate_steps = detail::get_or(a, "steps", c.ablate_steps);
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return run_config_from_json(detail::load_json(path));
}

/// Resolved-config echo for run manifests: every knob after defaulting,
/// sufficient to reproduce the run together with the seed.
inline Json run_config_to_json(const RunConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["ema_alpha"] = c.ema_alpha;
    j["cr_k"] = c.cr_k;
    j["dbscan_epsilon"] = c.dbscan_epsilon;
    j["dbscan_min_points"] = c.dbscan_min_points;
    j["rotation_range_deg"] = c.rotation_range_deg;
    j["learning_rate"] = c.learning_rate;
    j["grad_clip"] = c.grad_clip;
    j["pretrain_steps"] = c.pretrain_steps;
    j["adapt_steps"] = c.adapt_steps;
    j["val_interval"] = c.val_interval;
    j["transform_mode"] = c.transform_mode;
    j["pseudo_frame"] = c.pseudo_frame;
    j["metric_averaging"] = c.metric_averaging;
    j["estimator"] = {{"dim", c.estimator_dim},
                      {"candidate_k", c.candidate_k},
                      {"tau_init", c.tau_init},
                      {"embed_scale", c.embed_scale}};
    j["preprocess"] = {{"ground_removal", to_string(c.ground_removal)},
                       {"height_threshold", c.height_threshold}};
    j["data"] = {{"source", c.source_data},
                 {"target", c.target_data},
                 {"target_val_fraction", c.target_val_fraction}};
    j["ablate"] = {{"alpha_min", c.ablate_alpha_min}, {"alpha_max", c.ablate_alpha_max},
                   {"alpha_step", c.ablate_alpha_step}, {"k_min", c.ablate_k_min},
                   {"k_max", c.ablate_k_max}, {"steps", c.ablate_steps}};
    return j;
}

}  // namespace sfuda
