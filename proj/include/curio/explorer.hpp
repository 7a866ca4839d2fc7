#pragma once

#include <array>
#include <string>
#include <vector>

#include "curio/model.hpp"
#include "curio/types.hpp"
#include "curio/world.hpp"

namespace curio::explorer {

/// Candidate sampling box shared by exploration and distillation: waypoint
/// offsets in meters, gripper commands unitless.
inline constexpr double kOffsetLo = -0.05;
inline constexpr double kOffsetHi = 0.05;
inline constexpr double kGripLo = 0.0;
inline constexpr double kGripHi = 1.0;

enum class Strategy { curiosity, random, active };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

/// Baselines predict the effect directly; curiosity needs the variance head.
model::HeadMode head_for(Strategy s);

struct ExplorationConfig {
    Strategy strategy = Strategy::curiosity;
    int candidates = 2000;
    int total_steps = 10000;
    int retrain_interval = 512;
    int epochs_per_retrain = 10;
    double active_threshold = 0.008;

    void validate() const;
};

/// Differential entropy of a 1-d Gaussian from its log-variance, in nats.
double gaussian_entropy(double log_var);

/// Mean of the three per-axis entropies.
double mean_entropy(const model::EffectDist& dist);

/// One draw from the candidate distribution.
ActionParams sample_candidate(Rng& rng);
ActionParams select_random_action(Rng& rng);

void clamp_to_box(ActionParams& a);

struct CuriosityPick {
    ActionParams action;
    std::size_t index = 0;
    double selected_entropy = 0.0;
    double mean_candidate_entropy = 0.0;
};

/// Samples `candidates` actions, scores each by the mean entropy of its
/// predicted effect distribution (eval mode), returns the argmax with
/// first-index tie-breaking.
CuriosityPick select_curious_action(const model::ModelParams& params,
                                    const std::array<double, 4>& object_features, Rng& rng,
                                    int candidates);

bool active_filter(const Transition& t, double threshold);

struct MetricsRow {
    int step = 0;
    Strategy strategy = Strategy::curiosity;
    bool has_entropy = false;
    double mean_candidate_entropy = 0.0;
    double selected_entropy = 0.0;
    std::size_t dataset_size = 0;
    std::size_t training_size = 0;
    bool retrained = false;
    double train_loss = 0.0;  // last epoch's mean loss, when retrained
};

struct ExplorationResult {
    Dataset dataset;       // every executed interaction
    Dataset training_set;  // magnitude-filtered for active, same rows otherwise
    model::ModelParams params;
    std::vector<MetricsRow> metrics;
};

/// One JSON object per step; entropy fields only for curiosity, train_loss
/// only on retrain steps.
std::string metrics_jsonl(const std::vector<MetricsRow>& rows);

/// Exploration loop: fresh random single-object world each step, strategy
/// action selection, execution, periodic retraining on the accumulated
/// (filtered, for active) dataset. Deterministic for a given seed.
ExplorationResult run_exploration(const ExplorationConfig& explore,
                                  const world::WorldConfig& world_cfg,
                                  const model::EncoderConfig& model_cfg,
                                  const model::TrainConfig& train_cfg, std::uint64_t seed);

}  // namespace curio::explorer
