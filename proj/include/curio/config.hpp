#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "curio/explorer.hpp"
#include "curio/model.hpp"
#include "curio/planner.hpp"
#include "curio/symbols.hpp"
#include "curio/world.hpp"

namespace curio::config {

struct EvalConfig {
    int test_set_size = 2400;
    double effect_threshold = 0.008;  // magnitude filter for test-set rows
    int tasks_per_condition = 100;
    int max_attempt_factor = 200;  // resampling budget multiplier

    void validate() const;
};

struct ExperimentConfig {
    world::WorldConfig world;
    model::EncoderConfig model;
    model::TrainConfig train;
    explorer::ExplorationConfig explore;
    symbols::DistillConfig distill;
    planner::PlannerConfig planner;
    EvalConfig eval;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "out";
    int jobs = 1;

    void validate() const;
};

/// Parses a JSON config file; absent keys keep defaults, unknown keys are
/// rejected. ConfigError on any problem.
ExperimentConfig load_config(const std::filesystem::path& path);

ExperimentConfig parse_config(const std::string& text);

/// Canonical JSON rendering (every field, sorted keys).
std::string dump_config(const ExperimentConfig& cfg);

// model-config subset, reused by the checkpoint header block
std::string dump_model_config(const model::EncoderConfig& m);
model::EncoderConfig parse_model_config(const std::string& text);

/// Hash of the canonical rendering minus output_dir and jobs, so relocating
/// output or changing parallelism never invalidates artifacts.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace curio::config
