#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "curio/config.hpp"
#include "curio/explorer.hpp"
#include "curio/planner.hpp"
#include "curio/symbols.hpp"
#include "curio/types.hpp"
#include "curio/world.hpp"

namespace curio::harness {

/// Random states + random actions, keeping only transitions whose effect
/// magnitude reaches `threshold`; resamples until `count` rows are retained
/// or the attempt budget runs out (GenerationError).
Dataset generate_test_set(const world::WorldConfig& world_cfg, int count, double threshold,
                          std::uint64_t seed, int max_attempt_factor = 200);

/// Per-axis mean absolute error of the model's mean prediction.
std::array<double, 3> evaluate_prediction_error(const model::ModelParams& params, const Dataset& test_set);

/// Feasible-by-construction planning tasks: random initial state, 1 (single
/// object) or up to max_depth (double object) random executed actions, end
/// state as goal. Tasks where no object moves past the goal threshold are
/// resampled so the empty plan never trivially succeeds.
std::vector<planner::PlanningProblem> generate_tasks(const world::WorldConfig& world_cfg,
                                                     const planner::PlannerConfig& planner_cfg,
                                                     int count, std::size_t object_count,
                                                     std::uint64_t seed, int max_attempt_factor = 200);

struct PlanOutcome {
    bool plan_found = false;
    bool exec_success = false;
    std::size_t plan_length = 0;
};

struct CellResult {
    explorer::Strategy strategy = explorer::Strategy::curiosity;
    std::uint64_t seed = 0;
    std::array<double, 3> mae{};
    std::size_t dataset_rows = 0;
    std::size_t training_rows = 0;
    std::uint64_t dataset_hash = 0;
    std::vector<symbols::SymbolCount> action_symbols;
    std::vector<std::string> labels;  // accepted primitives, in library order
    std::size_t accepted_primitives = 0;
    double plan_found_single = 0.0, plan_found_double = 0.0;
    double exec_success_single = 0.0, exec_success_double = 0.0;
};

struct Report {
    std::uint64_t config_hash = 0;
    std::string version;
    std::vector<CellResult> cells;  // strategy-major, seed-minor order

    std::string render_text() const;
    std::string render_jsonl() const;
};

/// Full three-strategy comparison. Persists per-cell artifacts (dataset,
/// checkpoint, library, metrics) plus report.txt / report.jsonl under
/// cfg.output_dir, all atomically. Cells run concurrently when cfg.jobs > 1
/// with identical output.
Report run_comparison(const config::ExperimentConfig& cfg);

/// Rebuilds the report from artifacts persisted by a previous run_comparison
/// (exploration is not repeated; everything else is recomputed).
Report rebuild_report(const config::ExperimentConfig& cfg);

}  // namespace curio::harness
