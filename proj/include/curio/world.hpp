#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "curio/types.hpp"

namespace curio::world {

struct WorldConfig {
    double dim_min = 0.02;
    double dim_max = 0.08;
    double grasp_radius = 0.03;
    double sweep_resolution = 0.001;
    double noise_sigma = 0.0;
    double workspace_extent = 1.0;
    /// Noise floor for effect-magnitude filters (test set, active learning,
    /// annotation).
    double effect_threshold = 0.008;

    void validate() const;
};

/// Per-step trace of one execution, used by annotation to distinguish
/// primitives that lift the object from planar ones.
struct ExecTrace {
    std::vector<Pose> target_poses;
    double max_lift = 0.0;       // max of (target z - d/2) over the sweep
    bool ever_attached = false;
    bool attached_at_end = false;
};

/// Samples a fresh resting state: dims uniform in [dim_min, dim_max], type
/// uniform in {0,1}, centers uniform with the footprint inside the workspace,
/// z = d/2. Footprints of two objects never overlap; rejection sampling
/// throws PlacementError after exhausting attempts.
WorldState spawn_random(const WorldConfig& cfg, std::uint64_t rng_seed, std::size_t object_count);

/// Sweeps a point gripper along the piecewise-linear path p1 -> p2 -> p3
/// (waypoints anchored at the target's start center, all components
/// interpolated linearly, gripper z clamped to the plane) and applies the
/// surrogate contact rules:
///   - closed gripper within grasp_radius of the target center attaches it
///     (hollow objects only when the contact point lies in the rim annulus
///     [0.6, 1.0] * min(s_x, s_y)/2 from the center in the xy plane);
///   - attached objects track the gripper until it opens, then drop to z=d/2;
///   - unattached contact pushes an object horizontally out of penetration
///     along the motion direction (non-target objects are only ever pushed).
/// Effect is the target pose delta. Deterministic for noise_sigma = 0.
std::pair<WorldState, Effect> execute(const WorldConfig& cfg, const WorldState& state, const ActionParams& action);

/// execute() variant that also reports the sweep trace.
std::pair<WorldState, Effect> execute_traced(const WorldConfig& cfg, const WorldState& state,
                                             const ActionParams& action, ExecTrace& trace);

/// L1 magnitude |dx| + |dy| + |dz|.
double total_effect_magnitude(const Effect& e);

}  // namespace curio::world
