#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/random.hpp"

namespace sfuda {

// ---------------------------------------------------------------------------
// Scene model. World axes: x forward, y left, z up. Entity poses map
// entity-local coordinates to world coordinates (row convention).
// ---------------------------------------------------------------------------

enum class EntityKind { Vehicle, StaticProp, Ground };

struct Entity {
    std::uint32_t id = 0;
    EntityKind kind = EntityKind::StaticProp;
    std::vector<Vec3> shape;              // sampled surface, entity-local
    std::vector<RigidMotion> trajectory;  // pose per frame

    bool present(std::size_t frame) const { return frame < trajectory.size(); }
    const RigidMotion& pose(std::size_t frame) const { return trajectory[frame]; }
};

struct SensorPath {
    std::vector<RigidMotion> poses;  // sensor-local -> world, per frame
    double dt = 0.1;                 // capture interval, seconds

    Vec3 to_world(std::size_t frame, const Vec3& local) const { return poses[frame].apply(local); }
    Vec3 to_local(std::size_t frame, const Vec3& world) const {
        return poses[frame].inverse().apply(world);
    }
};

struct Scene {
    std::vector<Entity> entities;
    SensorPath sensor;
    std::vector<std::uint32_t> ground_ids;
};

struct AnnotatedPair {
    PointCloud first;   // sensor-local frame-i coordinates, labeled
    PointCloud second;  // sensor-local frame-(i+1) coordinates
    FlowField flow;     // aligned with first; maps into frame-(i+1) sensor coordinates
};

// ---------------------------------------------------------------------------
// Scene script
// ---------------------------------------------------------------------------

struct LidarSpec {
    int azimuth_count = 256;
    int elevation_count = 32;
    double elevation_min = -25.0 * M_PI / 180.0;
    double elevation_max = 5.0 * M_PI / 180.0;
    double min_range = 0.5;
    double max_range = 60.0;
    double range_noise_sigma = 0.0;
};

struct GroundSpec {
    bool present = true;
    double extent = 40.0;   // half-size of the sampled patch
    double spacing = 0.3;   // sample grid spacing
    double slope = 0.0;     // z = slope * x
};

struct PropSpec {
    int count = 6;
    double size_min = 0.6;
    double size_max = 2.2;
    double radius_min = 5.0;
    double radius_max = 30.0;
    double sphere_fraction = 0.4;  // remaining props are boxes
};

struct VehicleSpec {
    int count = 3;
    double length = 4.2, width = 1.9, height = 1.6;  // nominal dims, jittered per vehicle
    double speed_min = 3.0, speed_max = 10.0;
    double yaw_rate_max = 0.25;  // rad/s
    double radius_min = 6.0, radius_max = 25.0;
};

struct SensorSpec {
    double height = 1.8;
    double speed = 8.0;
    double heading = 0.0;     // initial travel direction, radians
    double yaw_rate = 0.0;
    double climb_rate = 0.0;    // vertical velocity, m/s (suspension heave)
    double climb_jitter = 0.0;  // per-scene uniform spread around climb_rate
};

enum class GroundRemovalMode { None, ByHeight, ByEntity };

struct PreprocessConfig {
    GroundRemovalMode ground_removal = GroundRemovalMode::ByEntity;
    double height_threshold = 0.3;
    double max_range = 60.0;
    int subsample = 8192;
};

struct SceneScript {
    std::string name = "scene";
    int n_pairs = 20;
    int frame_count = 2;
    double dt = 0.1;
    double surface_spacing = 0.12;  // entity surface sample spacing
    LidarSpec lidar;
    GroundSpec ground;
    PropSpec props;
    VehicleSpec vehicles;
    SensorSpec sensor;
    PreprocessConfig preprocess;

    void validate() const {
        if (n_pairs < 1) throw InvalidScript("scene script: n_pairs must be >= 1");
        if (frame_count < 2) throw InvalidScript("scene script: frame_count must be >= 2");
        if (dt <= 0.0) throw InvalidScript("scene script: dt must be positive");
        if (surface_spacing <= 0.0) throw InvalidScript("scene script: surface_spacing must be positive");
        if (lidar.azimuth_count < 1 || lidar.elevation_count < 1)
            throw InvalidScript("scene script: lidar grid must be at least 1x1");
        if (lidar.elevation_max <= lidar.elevation_min)
            throw InvalidScript("scene script: lidar elevation range is empty");
        if (lidar.max_range <= 0.0 || lidar.range_noise_sigma < 0.0)
            throw InvalidScript("scene script: bad lidar ranges");
        if (ground.present && (ground.extent <= 0.0 || ground.spacing <= 0.0))
            throw InvalidScript("scene script: bad ground patch");
        if (props.count < 0 || vehicles.count < 0)
            throw InvalidScript("scene script: entity counts must be non-negative");
        if (props.count > 0 && (props.size_min <= 0.0 || props.size_max < props.size_min))
            throw InvalidScript("scene script: bad prop size range");
        if (vehicles.count > 0 && vehicles.speed_max < vehicles.speed_min)
            throw InvalidScript("scene script: bad vehicle speed range");
        if (preprocess.subsample < 1) throw InvalidScript("scene script: subsample must be >= 1");
        if (preprocess.max_range <= 0.0) throw InvalidScript("scene script: bad preprocess range");
    }
};

// ---------------------------------------------------------------------------
// Surface sampling
// ---------------------------------------------------------------------------

namespace detail {

inline int grid_steps(double length, double spacing) {
    return std::max(2, int(std::lround(length / spacing)) + 1);
}

// Cuboid surface, base at z = 0, centered in x/y. Bottom face omitted.
inline std::vector<Vec3> sample_box(double l, double w, double h, double spacing) {
    std::vector<Vec3> out;
    const int nx = grid_steps(l, spacing), ny = grid_steps(w, spacing), nz = grid_steps(h, spacing);
    auto lerp = [](double a, double b, int i, int n) { return a + (b - a) * double(i) / double(n - 1); };
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            out.emplace_back(lerp(-l / 2, l / 2, i, nx), lerp(-w / 2, w / 2, j, ny), h);  // top
    for (int i = 0; i < nx; ++i)
        for (int k = 0; k < nz; ++k) {
            const double x = lerp(-l / 2, l / 2, i, nx), z = lerp(0.0, h, k, nz);
            out.emplace_back(x, -w / 2, z);
            out.emplace_back(x, w / 2, z);
        }
    for (int j = 1; j + 1 < ny; ++j)
        for (int k = 0; k < nz; ++k) {
            const double y = lerp(-w / 2, w / 2, j, ny), z = lerp(0.0, h, k, nz);
            out.emplace_back(-l / 2, y, z);
            out.emplace_back(l / 2, y, z);
        }
    return out;
}

// Fibonacci sphere, centered at the origin.
inline std::vector<Vec3> sample_sphere(double radius, double spacing) {
    const double area = 4.0 * M_PI * radius * radius;
    const int n = std::max(32, int(std::lround(area / (spacing * spacing))));
    std::vector<Vec3> out;
    out.reserve(n);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * double(i);
        out.emplace_back(radius * r * std::cos(phi), radius * r * std::sin(phi), radius * z);
    }
    return out;
}

// Axis-aligned ellipsoid with semi-axes (a, b, c), base resting on z = 0.
inline std::vector<Vec3> sample_ellipsoid(double a, double b, double c, double spacing) {
    const double mean_radius = (a + b + c) / 3.0;
    std::vector<Vec3> out = sample_sphere(mean_radius, spacing);
    for (Vec3& p : out) {
        p.x() *= a / mean_radius;
        p.y() *= b / mean_radius;
        p.z() = p.z() * c / mean_radius + c;
    }
    return out;
}

inline std::vector<Vec3> sample_ground(const GroundSpec& spec, Rng& rng) {
    std::vector<Vec3> out;
    const int n = std::max(2, int(std::lround(2.0 * spec.extent / spec.spacing)) + 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = -spec.extent + spec.spacing * double(i) +
                             uniform_real(rng, -0.3, 0.3) * spec.spacing;
            const double y = -spec.extent + spec.spacing * double(j) +
                             uniform_real(rng, -0.3, 0.3) * spec.spacing;
            out.emplace_back(x, y, spec.slope * x);
        }
    return out;
}

inline double ground_height(const GroundSpec& spec, double x) {
    return spec.present ? spec.slope * x : 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene construction
// ---------------------------------------------------------------------------

/// Deterministic procedural scene: one ground entity, static props, moving
/// vehicles with piecewise-constant velocity and yaw rate, and a sensor
/// following an ego path at fixed height above ground.
inline Scene build_scene(const SceneScript& script, std::uint64_t seed) {
    script.validate();
    Scene scene;
    Rng rng = make_rng(seed, 0x5343454eULL);  // scene stream
    std::uint32_t next_id = 0;

    if (script.ground.present) {
        Entity ground;
        ground.id = next_id++;
        ground.kind = EntityKind::Ground;
        ground.shape = detail::sample_ground(script.ground, rng);
        ground.trajectory.assign(script.frame_count, RigidMotion::identity());
        scene.ground_ids.push_back(ground.id);
        scene.entities.push_back(std::move(ground));
    }

    for (int p = 0; p < script.props.count; ++p) {
        Entity prop;
        prop.id = next_id++;
        prop.kind = EntityKind::StaticProp;
        const double size = uniform_real(rng, script.props.size_min, script.props.size_max);
        const double angle = uniform_real(rng, 0.0, 2.0 * M_PI);
        const double radius = uniform_real(rng, script.props.radius_min, script.props.radius_max);
        const bool sphere = uniform01(rng) < script.props.sphere_fraction;
        const Vec3 site(radius * std::cos(angle), radius * std::sin(angle), 0.0);
        RigidMotion pose;
        if (sphere) {
            prop.shape = detail::sample_sphere(size / 2.0, script.surface_spacing);
            pose.translation =
                Vec3(site.x(), site.y(), detail::ground_height(script.ground, site.x()) + size / 2.0);
        } else {
            const double w = size * uniform_real(rng, 0.6, 1.0);
            const double h = size * uniform_real(rng, 0.6, 1.4);
            prop.shape = detail::sample_box(size, w, h, script.surface_spacing);
            pose.translation = Vec3(site.x(), site.y(), detail::ground_height(script.ground, site.x()));
        }
        prop.trajectory.assign(script.frame_count, pose);
        scene.entities.push_back(std::move(prop));
    }

    for (int v = 0; v < script.vehicles.count; ++v) {
        Entity veh;
        veh.id = next_id++;
        veh.kind = EntityKind::Vehicle;
        // rounded bodies: curved surfaces keep cross-frame correspondence
        // well-posed everywhere, unlike flat box faces
        const double l = script.vehicles.length * uniform_real(rng, 0.85, 1.15);
        const double w = script.vehicles.width * uniform_real(rng, 0.85, 1.15);
        const double h = script.vehicles.height * uniform_real(rng, 0.85, 1.15);
        veh.shape = detail::sample_ellipsoid(l / 2.0, w / 2.0, h / 2.0, script.surface_spacing);

        const double angle = uniform_real(rng, 0.0, 2.0 * M_PI);
        const double radius = uniform_real(rng, script.vehicles.radius_min, script.vehicles.radius_max);
        double x = radius * std::cos(angle), y = radius * std::sin(angle);
        double yaw = uniform_real(rng, 0.0, 2.0 * M_PI);
        const double speed = uniform_real(rng, script.vehicles.speed_min, script.vehicles.speed_max);
        const double yaw_rate =
            uniform_real(rng, -script.vehicles.yaw_rate_max, script.vehicles.yaw_rate_max);

        veh.trajectory.reserve(script.frame_count);
        for (int f = 0; f < script.frame_count; ++f) {
            RigidMotion pose = rotation_about_up(yaw);
            pose.translation = Vec3(x, y, detail::ground_height(script.ground, x));
            veh.trajectory.push_back(pose);
            x += speed * std::cos(yaw) * script.dt;
            y += speed * std::sin(yaw) * script.dt;
            yaw += yaw_rate * script.dt;
        }
        scene.entities.push_back(std::move(veh));
    }

    scene.sensor.dt = script.dt;
    const double climb = script.sensor.climb_rate +
                         uniform_real(rng, -script.sensor.climb_jitter, script.sensor.climb_jitter);
    double sx = 0.0, sy = 0.0, sz = 0.0, syaw = script.sensor.heading;
    scene.sensor.poses.reserve(script.frame_count);
    for (int f = 0; f < script.frame_count; ++f) {
        RigidMotion pose = rotation_about_up(syaw);
        pose.translation =
            Vec3(sx, sy, detail::ground_height(script.ground, sx) + script.sensor.height + sz);
        scene.sensor.poses.push_back(pose);
        sx += script.sensor.speed * std::cos(syaw) * script.dt;
        sy += script.sensor.speed * std::sin(syaw) * script.dt;
        sz += climb * script.dt;
        syaw += script.sensor.yaw_rate * script.dt;
    }
    return scene;
}

// ---------------------------------------------------------------------------
// LiDAR scan: spherical-grid depth buffer over entity surface samples.
// Each azimuth x elevation cell keeps the nearest projected sample, which
// yields occlusion for free; optional Gaussian range noise perturbs each
// return along its ray. Points come back in sensor-local coordinates with
// the hit entity's id as label.
// ---------------------------------------------------------------------------

inline PointCloud lidar_scan(const std::vector<Entity>& entities, std::size_t frame,
                             const RigidMotion& sensor_pose, const LidarSpec& spec, Rng& rng) {
    struct Cell {
        double range = std::numeric_limits<double>::infinity();
        Vec3 local = Vec3::Zero();
        std::uint32_t label = 0;
        bool hit = false;
    };
    std::vector<Cell> cells(std::size_t(spec.azimuth_count) * std::size_t(spec.elevation_count));
    const RigidMotion to_sensor = sensor_pose.inverse();
    const double el_span = spec.elevation_max - spec.elevation_min;

    for (const Entity& entity : entities) {
        if (!entity.present(frame)) continue;
        const RigidMotion local_to_sensor = entity.pose(frame).then(to_sensor);
        for (const Vec3& sample : entity.shape) {
            const Vec3 q = local_to_sensor.apply(sample);
            const double range = q.norm();
            if (range < spec.min_range || range > spec.max_range) continue;
            const double el = std::asin(std::clamp(q.z() / range, -1.0, 1.0));
            if (el < spec.elevation_min || el >= spec.elevation_max) continue;
            const double az = std::atan2(q.y(), q.x());  // [-pi, pi]
            int ai = int((az + M_PI) / (2.0 * M_PI) * double(spec.azimuth_count));
            ai = std::clamp(ai, 0, spec.azimuth_count - 1);
            const int ei = std::clamp(int((el - spec.elevation_min) / el_span * double(spec.elevation_count)),
                                      0, spec.elevation_count - 1);
            Cell& cell = cells[std::size_t(ei) * std::size_t(spec.azimuth_count) + std::size_t(ai)];
            if (!cell.hit || range < cell.range) {
                cell.range = range;
                cell.local = q;
                cell.label = entity.id;
                cell.hit = true;
            }
        }
    }

    PointCloud cloud;
    for (const Cell& cell : cells) {
        if (!cell.hit) continue;
        Vec3 point = cell.local;
        if (spec.range_noise_sigma > 0.0) {
            const double noisy = cell.range + normal(rng, 0.0, spec.range_noise_sigma);
            point *= noisy / cell.range;
        }
        cloud.points.push_back(point);
        cloud.labels.push_back(cell.label);
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Flow annotation from entity motion:
//   f = ((p - P_e) * R_e^-1 * R'_e + P'_e) - p      (world frame, row vectors)
// Points whose entity is absent in the next frame, and static or ground
// points, are held fixed in world; their flow arises purely from expressing
// both frames in their own sensor coordinates.
// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 entity_motion_flow(const Vec3& p_world, const RigidMotion& cur, const RigidMotion& next) {
    const Vec3 rel = p_world - cur.translation;           // p - P_e
    const Vec3 in_entity = cur.rotation * rel;            // rel * R_e^-1 (row convention)
    const Vec3 advected = next.rotation.transpose() * in_entity;  // * R'_e
    return advected + next.translation - p_world;         // + P'_e - p
}

}  // namespace detail

inline AnnotatedPair annotate_pair(const std::vector<Entity>& entities, const SensorPath& sensor,
                                   std::size_t frame, const PointCloud& first,
                                   const PointCloud& second) {
    if (!first.has_labels()) throw MissingLabels("annotate_pair: first frame carries no entity labels");

    std::unordered_map<std::uint32_t, const Entity*> by_id;
    by_id.reserve(entities.size());
    for (const Entity& e : entities) by_id.emplace(e.id, &e);

    AnnotatedPair out;
    out.first = first;
    out.second = second;
    out.flow.vectors.resize(first.size());

    for (std::size_t i = 0; i < first.size(); ++i) {
        const Vec3 p_world = sensor.to_world(frame, first.points[i]);
        Vec3 f_world = Vec3::Zero();
        const auto it = by_id.find(first.labels[i]);
        if (it != by_id.end() && it->second->kind == EntityKind::Vehicle &&
            it->second->present(frame) && it->second->present(frame + 1)) {
            f_world = detail::entity_motion_flow(p_world, it->second->pose(frame),
                                                 it->second->pose(frame + 1));
        }
        out.flow.vectors[i] =
            sensor.to_local(frame + 1, p_world + f_world) - sensor.to_local(frame, p_world);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ego-motion retrieval:  F = P - (P - dt * F0) * (T^s)^-1 * T^t
// with F0 a speed field (m/s). T^s, T^t are the per-frame pose matrices.
// The matrix convention is pinned empirically by the compensate/retrieve
// round trip rather than by prose; ego_compensate is the exact algebraic
// inverse.
// ---------------------------------------------------------------------------

inline FlowField retrieve_ego_motion(const PointCloud& first, const FlowField& compensated_speed,
                                     const RigidMotion& pose_s, const RigidMotion& pose_t,
                                     double dt) {
    if (compensated_speed.size() != first.size())
        throw LengthMismatch("retrieve_ego_motion: flow not aligned with cloud");
    const RigidMotion relative = pose_s.inverse().then(pose_t);  // (T^s)^-1 * T^t
    FlowField out;
    out.vectors.resize(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        const Vec3& p = first.points[i];
        out.vectors[i] = p - relative.apply(p - dt * compensated_speed.vectors[i]);
    }
    return out;
}

inline FlowField ego_compensate(const PointCloud& first, const FlowField& full_flow,
                                const RigidMotion& pose_s, const RigidMotion& pose_t, double dt) {
    if (full_flow.size() != first.size())
        throw LengthMismatch("ego_compensate: flow not aligned with cloud");
    const RigidMotion inverse_relative = pose_t.inverse().then(pose_s);
    FlowField out;
    out.vectors.resize(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        const Vec3& p = first.points[i];
        out.vectors[i] = (p - inverse_relative.apply(p - full_flow.vectors[i])) / dt;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Preprocessing: ground removal, range filter, seeded subsampling. Every
// stage returns an index map so flow fields and labels filter consistently.
// ---------------------------------------------------------------------------

struct GroundRemoval {
    GroundRemovalMode mode = GroundRemovalMode::ByHeight;
    double height_threshold = 0.3;
    std::vector<std::uint32_t> ground_ids;
};

struct FilteredCloud {
    PointCloud cloud;
    std::vector<int> index_map;  // survivor -> original index
};

inline FilteredCloud remove_ground(const PointCloud& cloud, const GroundRemoval& strategy) {
    FilteredCloud out;
    if (strategy.mode == GroundRemovalMode::ByEntity && !cloud.has_labels() && !cloud.empty())
        throw MissingLabels("remove_ground: by-entity strategy needs labels");
    const std::unordered_set<std::uint32_t> ground(strategy.ground_ids.begin(),
                                                   strategy.ground_ids.end());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        bool keep = true;
        if (strategy.mode == GroundRemovalMode::ByHeight)
            keep = cloud.points[i].z() >= strategy.height_threshold;
        else if (strategy.mode == GroundRemovalMode::ByEntity)
            keep = ground.count(cloud.labels[i]) == 0;
        if (!keep) continue;
        out.cloud.points.push_back(cloud.points[i]);
        if (cloud.has_labels()) out.cloud.labels.push_back(cloud.labels[i]);
        out.index_map.push_back(int(i));
    }
    return out;
}

namespace detail {

inline FilteredCloud range_filter(const PointCloud& cloud, double max_range) {
    FilteredCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.points[i].norm() > max_range) continue;
        out.cloud.points.push_back(cloud.points[i]);
        if (cloud.has_labels()) out.cloud.labels.push_back(cloud.labels[i]);
        out.index_map.push_back(int(i));
    }
    return out;
}

// Uniform subsample without replacement; selected indices keep their
// original relative order.
inline FilteredCloud subsample(const PointCloud& cloud, int n, Rng& rng) {
    FilteredCloud out;
    if (int(cloud.size()) <= n) {
        out.cloud = cloud;
        out.index_map.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) out.index_map[i] = int(i);
        return out;
    }
    std::vector<int> pool(cloud.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = int(i);
    for (int i = 0; i < n; ++i) {
        const std::size_t j = std::size_t(i) + uniform_below(rng, pool.size() - std::size_t(i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    for (int idx : pool) {
        out.cloud.points.push_back(cloud.points[idx]);
        if (cloud.has_labels()) out.cloud.labels.push_back(cloud.labels[idx]);
        out.index_map.push_back(idx);
    }
    return out;
}

inline std::vector<int> compose_maps(const std::vector<int>& outer, const std::vector<int>& inner) {
    std::vector<int> out(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) out[i] = outer[inner[i]];
    return out;
}

}  // namespace detail

struct PreprocessResult {
    AnnotatedPair pair;
    std::vector<int> first_index_map;   // into the original first frame
    std::vector<int> second_index_map;  // into the original second frame
};

inline PreprocessResult preprocess(const AnnotatedPair& input, const PreprocessConfig& cfg,
                                   const std::vector<std::uint32_t>& ground_ids, std::uint64_t seed) {
    GroundRemoval removal;
    removal.mode = cfg.ground_removal;
    removal.height_threshold = cfg.height_threshold;
    removal.ground_ids = ground_ids;

    auto chain = [&](const PointCloud& cloud, Rng rng) {
        FilteredCloud stage = cfg.ground_removal == GroundRemovalMode::None
                                  ? FilteredCloud{cloud, {}}
                                  : remove_ground(cloud, removal);
        if (cfg.ground_removal == GroundRemovalMode::None) {
            stage.index_map.resize(cloud.size());
            for (std::size_t i = 0; i < cloud.size(); ++i) stage.index_map[i] = int(i);
        }
        FilteredCloud ranged = detail::range_filter(stage.cloud, cfg.max_range);
        ranged.index_map = detail::compose_maps(stage.index_map, ranged.index_map);
        FilteredCloud sampled = detail::subsample(ranged.cloud, cfg.subsample, rng);
        sampled.index_map = detail::compose_maps(ranged.index_map, sampled.index_map);
        return sampled;
    };

    const FilteredCloud first = chain(input.first, make_rng(seed, 0x46524d31ULL));
    const FilteredCloud second = chain(input.second, make_rng(seed, 0x46524d32ULL));

    PreprocessResult out;
    out.pair.first = first.cloud;
    out.pair.second = second.cloud;
    out.pair.flow.vectors.reserve(first.index_map.size());
    for (int idx : first.index_map) out.pair.flow.vectors.push_back(input.flow.vectors[idx]);
    out.first_index_map = first.index_map;
    out.second_index_map = second.index_map;
    return out;
}

/// Convenience wrapper used by dataset generation: one fresh scene per pair,
/// frames 0 and 1 scanned, annotated, preprocessed.
inline AnnotatedPair generate_pair(const SceneScript& script, std::uint64_t seed,
                                   std::uint64_t pair_index) {
    const Scene scene = build_scene(script, mix_seed(seed, pair_index, 0x424c44ULL));
    Rng noise0 = make_rng(seed, pair_index, 0, 0x4e4f4953ULL);
    Rng noise1 = make_rng(seed, pair_index, 1, 0x4e4f4953ULL);
    const PointCloud frame0 = lidar_scan(scene.entities, 0, scene.sensor.poses[0], script.lidar, noise0);
    const PointCloud frame1 = lidar_scan(scene.entities, 1, scene.sensor.poses[1], script.lidar, noise1);
    const AnnotatedPair raw = annotate_pair(scene.entities, scene.sensor, 0, frame0, frame1);
    return preprocess(raw, script.preprocess, scene.ground_ids, mix_seed(seed, pair_index, 0x505245ULL))
        .pair;
}

}  // namespace sfuda
