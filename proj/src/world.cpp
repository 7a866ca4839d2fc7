#include "curio/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace curio::world {

namespace {

constexpr std::size_t kMaxPlacementAttempts = 1000;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
    return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

double dist3(const Vec3& a, const Pose& p) {
    const double dx = a.x - p.x, dy = a.y - p.y, dz = a.z - p.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool footprints_overlap(const WorldState::Entry& a, const WorldState::Entry& b) {
    return std::abs(a.pose.x - b.pose.x) < 0.5 * (a.spec.s_x + b.spec.s_x) &&
           std::abs(a.pose.y - b.pose.y) < 0.5 * (a.spec.s_y + b.spec.s_y);
}

bool point_in_box(const Vec3& p, const WorldState::Entry& obj) {
    const auto& c = obj.pose;
    const auto& s = obj.spec;
    return std::abs(p.x - c.x) < 0.5 * s.s_x && std::abs(p.y - c.y) < 0.5 * s.s_y &&
           p.z >= c.z - 0.5 * s.d && p.z < c.z + 0.5 * s.d;
}

// Translates the object horizontally along the motion direction until the
// point sits on the box surface (slab exit distance along -u).
void push_out(WorldState::Entry& obj, const Vec3& p, double ux, double uy) {
    const double norm = std::hypot(ux, uy);
    if (norm < 1e-15) return;
    ux /= norm;
    uy /= norm;
    double t = std::numeric_limits<double>::infinity();
    if (ux > 0.0)
        t = std::min(t, (p.x - (obj.pose.x - 0.5 * obj.spec.s_x)) / ux);
    else if (ux < 0.0)
        t = std::min(t, (p.x - (obj.pose.x + 0.5 * obj.spec.s_x)) / ux);
    if (uy > 0.0)
        t = std::min(t, (p.y - (obj.pose.y - 0.5 * obj.spec.s_y)) / uy);
    else if (uy < 0.0)
        t = std::min(t, (p.y - (obj.pose.y + 0.5 * obj.spec.s_y)) / uy);
    if (!std::isfinite(t) || t < 0.0) return;
    obj.pose.x += t * ux;
    obj.pose.y += t * uy;
}

bool grasp_contact(const WorldConfig& cfg, const Vec3& p, const WorldState::Entry& obj) {
    if (dist3(p, obj.pose) > cfg.grasp_radius) return false;
    if (obj.spec.type == 0) return true;
    // Hollow: contact must lie in the rim annulus.
    const double r = std::hypot(p.x - obj.pose.x, p.y - obj.pose.y);
    const double rim = 0.5 * std::min(obj.spec.s_x, obj.spec.s_y);
    return r >= 0.6 * rim && r <= rim;
}

}  // namespace

void WorldConfig::validate() const {
    if (!(dim_min > 0.0) || !(dim_min <= dim_max)) throw ConfigError("world: need 0 < dim_min <= dim_max");
    if (!(grasp_radius > 0.0)) throw ConfigError("world: grasp_radius must be positive");
    if (!(sweep_resolution > 0.0)) throw ConfigError("world: sweep_resolution must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("world: noise_sigma must be >= 0");
    if (!(workspace_extent >= dim_max)) throw ConfigError("world: workspace_extent smaller than dim_max");
    if (!(effect_threshold >= 0.0)) throw ConfigError("world: effect_threshold must be >= 0");
}

WorldState spawn_random(const WorldConfig& cfg, std::uint64_t rng_seed, std::size_t object_count) {
    cfg.validate();
    if (object_count < 1 || object_count > 2) throw InputError("spawn_random: object_count must be 1 or 2");

    Rng rng(rng_seed);
    WorldState state;
    for (std::size_t i = 0; i < object_count; ++i) {
        WorldState::Entry e;
        e.spec.s_x = rng.uniform(cfg.dim_min, cfg.dim_max);
        e.spec.s_y = rng.uniform(cfg.dim_min, cfg.dim_max);
        e.spec.d = rng.uniform(cfg.dim_min, cfg.dim_max);
        e.spec.type = static_cast<int>(rng.index(2));
        e.pose.z = 0.5 * e.spec.d;

        const double half = 0.5 * cfg.workspace_extent;
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
            e.pose.x = rng.uniform(-half + 0.5 * e.spec.s_x, half - 0.5 * e.spec.s_x);
            e.pose.y = rng.uniform(-half + 0.5 * e.spec.s_y, half - 0.5 * e.spec.s_y);
            bool clash = false;
            for (const auto& other : state.objects)
                if (footprints_overlap(e, other)) clash = true;
            if (!clash) {
                placed = true;
                break;
            }
        }
        if (!placed) throw PlacementError("spawn_random: could not place object without overlap");
        state.objects.push_back(e);
    }
    state.target_index = 0;
    return state;
}

std::pair<WorldState, Effect> execute_traced(const WorldConfig& cfg, const WorldState& state,
                                             const ActionParams& action, ExecTrace& trace) {
    cfg.validate();
    if (!action.finite()) throw InputError("execute: non-finite action");
    if (state.objects.empty() || state.target_index >= state.objects.size())
        throw InputError("execute: invalid world state");

    WorldState out = state;
    auto& target = out.objects[out.target_index];
    const Pose start_pose = target.pose;
    const double rest_z = 0.5 * target.spec.d;

    // Absolute waypoints, anchored at the target's start center; the gripper
    // cannot go below the plane.
    std::array<Vec3, kWaypoints> wp;
    std::array<double, kWaypoints> wg{};
    for (std::size_t i = 0; i < kWaypoints; ++i) {
        wp[i] = {start_pose.x + action.x(i), start_pose.y + action.y(i), start_pose.z + action.z(i)};
        wg[i] = action.g(i);
    }

    bool attached = false;
    Vec3 hold_offset{};
    Vec3 prev = {wp[0].x, wp[0].y, std::max(wp[0].z, 0.0)};

    trace = ExecTrace{};
    trace.target_poses.push_back(target.pose);

    auto visit = [&](const Vec3& raw, double g, bool first) {
        Vec3 p = {raw.x, raw.y, std::max(raw.z, 0.0)};
        const bool open = g >= 0.5;
        const double mvx = p.x - prev.x;
        const double mvy = p.y - prev.y;

        if (attached) {
            if (open) {
                attached = false;
                target.pose.z = rest_z;  // drop in place
            } else {
                target.pose.x = p.x + hold_offset.x;
                target.pose.y = p.y + hold_offset.y;
                target.pose.z = std::max(p.z + hold_offset.z, rest_z);
            }
        }
        if (!attached) {
            if (!open && grasp_contact(cfg, p, target)) {
                attached = true;
                trace.ever_attached = true;
                hold_offset = {target.pose.x - p.x, target.pose.y - p.y, target.pose.z - p.z};
            } else if (!first && point_in_box(p, target)) {
                push_out(target, p, mvx, mvy);
            }
        }
        for (std::size_t i = 0; i < out.objects.size(); ++i) {
            if (i == out.target_index) continue;
            if (!first && point_in_box(p, out.objects[i])) push_out(out.objects[i], p, mvx, mvy);
        }

        trace.target_poses.push_back(target.pose);
        trace.max_lift = std::max(trace.max_lift, target.pose.z - rest_z);
        prev = p;
    };

    visit(wp[0], wg[0], /*first=*/true);
    for (std::size_t seg = 0; seg + 1 < kWaypoints; ++seg) {
        const Vec3& a = wp[seg];
        const Vec3& b = wp[seg + 1];
        const double len = std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) +
                                     (b.z - a.z) * (b.z - a.z));
        const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / cfg.sweep_resolution)));
        for (std::size_t k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(steps);
            visit(lerp(a, b, t), wg[seg] + (wg[seg + 1] - wg[seg]) * t, /*first=*/false);
        }
    }
    trace.attached_at_end = attached;

    if (cfg.noise_sigma > 0.0) {
        // Noise is a deterministic function of the interaction so replays of
        // the same (state, action) reproduce the same observation.
        std::uint64_t h = fnv1a64(&action.v, sizeof(action.v));
        h = fnv1a64(&start_pose, sizeof(start_pose), h);
        Rng noise(h);
        target.pose.x += noise.normal(0.0, cfg.noise_sigma);
        target.pose.y += noise.normal(0.0, cfg.noise_sigma);
        target.pose.z += noise.normal(0.0, cfg.noise_sigma);
    }

    Effect eff{target.pose.x - start_pose.x, target.pose.y - start_pose.y, target.pose.z - start_pose.z};
    return {std::move(out), eff};
}

std::pair<WorldState, Effect> execute(const WorldConfig& cfg, const WorldState& state, const ActionParams& action) {
    ExecTrace trace;
    return execute_traced(cfg, state, action, trace);
}

double total_effect_magnitude(const Effect& e) {
    return std::abs(e.dx) + std::abs(e.dy) + std::abs(e.dz);
}

}  // namespace curio::world
