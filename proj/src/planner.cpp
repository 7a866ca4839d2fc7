#include "curio/planner.hpp"

#include <cmath>
#include <deque>

namespace curio::planner {

void PlannerConfig::validate() const {
    if (!(goal_threshold > 0.0)) throw ConfigError("planner: goal_threshold must be positive");
    if (max_depth < 0) throw ConfigError("planner: max_depth must be >= 0");
}

WorldState predict_transition(const model::ModelParams& params, const WorldState& state,
                              const symbols::DistilledPrimitive& primitive, std::size_t target_index) {
    if (target_index >= state.objects.size())
        throw InputError("predict_transition: target_index out of range");

    const std::array<double, 4> feats = state.objects[target_index].spec.features();
    model::Mat O(1, 4), A(1, kActionDim);
    for (int d = 0; d < 4; ++d) O(0, d) = feats[static_cast<std::size_t>(d)];
    for (std::size_t d = 0; d < kActionDim; ++d) A(0, static_cast<Eigen::Index>(d)) = primitive.action.v[d];
    const model::Mat mu = model::predict_mean_batch(params, O, A);

    WorldState next = state;
    Pose& p = next.objects[target_index].pose;
    p.x += mu(0, 0);
    p.y += mu(0, 1);
    p.z = std::max(p.z + mu(0, 2), state.objects[target_index].spec.d / 2.0);
    return next;
}

bool goal_check(const WorldState& state, const std::vector<Pose>& goal_positions, double threshold) {
    if (goal_positions.size() != state.objects.size())
        throw InputError("goal_check: goal count does not match object count");
    for (std::size_t i = 0; i < goal_positions.size(); ++i) {
        const Pose& p = state.objects[i].pose;
        const Pose& g = goal_positions[i];
        const double d2 = (p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y) +
                          (p.z - g.z) * (p.z - g.z);
        if (d2 > threshold * threshold) return false;
    }
    return true;
}

Plan bfs_plan(const model::ModelParams& params, const std::vector<symbols::DistilledPrimitive>& library,
              const PlanningProblem& problem) {
    if (library.empty()) throw InputError("bfs_plan: empty primitive library");
    if (problem.goal_positions.size() != problem.initial.objects.size())
        throw InputError("bfs_plan: goal count does not match object count");
    if (!(problem.threshold > 0.0)) throw InputError("bfs_plan: threshold must be positive");
    if (problem.max_depth < 0) throw InputError("bfs_plan: max_depth must be >= 0");

    const std::size_t n_obj = problem.initial.objects.size();
    const std::size_t n_prim = library.size();

    // The model sees only (features, action), so each (primitive, object)
    // yields one mean effect for the whole search.
    std::vector<std::array<double, 3>> mu(n_prim * n_obj);
    std::vector<double> rest(n_obj);
    {
        const Eigen::Index rows = static_cast<Eigen::Index>(n_prim * n_obj);
        model::Mat O(rows, 4), A(rows, kActionDim);
        Eigen::Index r = 0;
        for (std::size_t pi = 0; pi < n_prim; ++pi)
            for (std::size_t oi = 0; oi < n_obj; ++oi, ++r) {
                const std::array<double, 4> f = problem.initial.objects[oi].spec.features();
                for (int d = 0; d < 4; ++d) O(r, d) = f[static_cast<std::size_t>(d)];
                for (std::size_t d = 0; d < kActionDim; ++d)
                    A(r, static_cast<Eigen::Index>(d)) = library[pi].action.v[d];
            }
        const model::Mat M = model::predict_mean_batch(params, O, A);
        for (Eigen::Index i = 0; i < rows; ++i)
            mu[static_cast<std::size_t>(i)] = {M(i, 0), M(i, 1), M(i, 2)};
        for (std::size_t oi = 0; oi < n_obj; ++oi)
            rest[oi] = problem.initial.objects[oi].spec.d / 2.0;
    }

    auto satisfied = [&](const std::vector<Pose>& pos) {
        for (std::size_t i = 0; i < n_obj; ++i) {
            const Pose& p = pos[i];
            const Pose& g = problem.goal_positions[i];
            const double d2 = (p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y) +
                              (p.z - g.z) * (p.z - g.z);
            if (d2 > problem.threshold * problem.threshold) return false;
        }
        return true;
    };

    struct Node {
        std::vector<Pose> pos;
        std::vector<PlanStep> steps;
    };

    std::vector<Pose> start(n_obj);
    for (std::size_t i = 0; i < n_obj; ++i) start[i] = problem.initial.objects[i].pose;

    Plan plan;
    std::deque<Node> queue;
    queue.push_back({std::move(start), {}});
    while (!queue.empty()) {
        Node node = std::move(queue.front());
        queue.pop_front();
        ++plan.expanded_nodes;
        if (satisfied(node.pos)) {
            plan.steps = std::move(node.steps);
            plan.predicted_final = std::move(node.pos);
            plan.found = true;
            return plan;
        }
        if (node.steps.size() >= static_cast<std::size_t>(problem.max_depth)) continue;
        for (std::size_t pi = 0; pi < n_prim; ++pi) {
            for (std::size_t oi = 0; oi < n_obj; ++oi) {
                Node child;
                child.pos = node.pos;
                const std::array<double, 3>& m = mu[pi * n_obj + oi];
                child.pos[oi].x += m[0];
                child.pos[oi].y += m[1];
                child.pos[oi].z = std::max(child.pos[oi].z + m[2], rest[oi]);
                child.steps = node.steps;
                child.steps.push_back({pi, oi});
                queue.push_back(std::move(child));
            }
        }
    }
    return plan;
}

ExecutionResult execute_plan(const world::WorldConfig& world_cfg,
                             const std::vector<symbols::DistilledPrimitive>& library, const Plan& plan,
                             const PlanningProblem& problem) {
    if (!plan.found) throw InputError("execute_plan: plan was not found");

    ExecutionResult res;
    res.final_state = problem.initial;
    for (const PlanStep& step : plan.steps) {
        if (step.primitive_index >= library.size())
            throw InputError("execute_plan: primitive index out of range");
        if (step.target_index >= res.final_state.objects.size())
            throw InputError("execute_plan: target index out of range");
        res.final_state.target_index = step.target_index;
        auto [next, eff] = world::execute(world_cfg, res.final_state, library[step.primitive_index].action);
        res.final_state = std::move(next);
        res.step_effects.push_back(eff);
    }
    res.success = goal_check(res.final_state, problem.goal_positions, problem.threshold);
    return res;
}

}  // namespace curio::planner
