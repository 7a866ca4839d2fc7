#pragma once

#include <vector>

#include "curio/model.hpp"
#include "curio/symbols.hpp"
#include "curio/types.hpp"
#include "curio/world.hpp"

namespace curio::planner {

struct PlannerConfig {
    double goal_threshold = 0.05;
    int max_depth = 3;

    void validate() const;
};

struct PlanningProblem {
    WorldState initial;
    std::vector<Pose> goal_positions;  // one per object
    double threshold = 0.05;
    int max_depth = 3;
};

struct PlanStep {
    std::size_t primitive_index = 0;
    std::size_t target_index = 0;
};

struct Plan {
    std::vector<PlanStep> steps;
    std::vector<Pose> predicted_final;
    bool found = false;
    std::size_t expanded_nodes = 0;
};

/// Applies the model's predicted mean effect of (target features, primitive
/// action) to the target object's position; other objects untouched; z floored
/// at the resting height. Works with either head mode.
WorldState predict_transition(const model::ModelParams& params, const WorldState& state,
                              const symbols::DistilledPrimitive& primitive, std::size_t target_index);

/// True iff every object lies within `threshold` (Euclidean) of its goal.
bool goal_check(const WorldState& state, const std::vector<Pose>& goal_positions, double threshold);

/// Level-order search, children ordered by (primitive index, target index);
/// returns the first goal-satisfying sequence, or found=false once max_depth
/// is exhausted. Never touches the world module.
Plan bfs_plan(const model::ModelParams& params, const std::vector<symbols::DistilledPrimitive>& library,
              const PlanningProblem& problem);

struct ExecutionResult {
    WorldState final_state;
    bool success = false;
    std::vector<Effect> step_effects;
};

/// Runs the plan's distilled actions in the world; success is goal_check on
/// the executed final state. Never consults the model.
ExecutionResult execute_plan(const world::WorldConfig& world_cfg,
                             const std::vector<symbols::DistilledPrimitive>& library, const Plan& plan,
                             const PlanningProblem& problem);

}  // namespace curio::planner
