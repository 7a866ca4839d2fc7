#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "curio/model.hpp"
#include "curio/types.hpp"
#include "curio/world.hpp"

namespace curio::symbols {

struct SymbolCode {
    std::vector<int> bits;  // each 0 or 1

    bool operator==(const SymbolCode&) const = default;
    std::string str() const;  // e.g. "101"
};

/// bit_i = 1 iff emb_i > 0; exact zeros map to 0.
SymbolCode binarize(const model::Vec& emb);

struct SymbolCount {
    SymbolCode code;
    std::size_t count = 0;
};

/// Distinct binarized codes over the dataset (eval mode), sorted
/// lexicographically by bits; counts partition the dataset.
std::vector<SymbolCount> enumerate_action_symbols(const model::ModelParams& params, const Dataset& data);
std::vector<SymbolCount> enumerate_object_symbols(const model::ModelParams& params, const Dataset& data);

struct DistillConfig {
    double step_size = 0.01;
    int iterations = 500;
    int seed_count = 64;
    double residual_bound = 0.25;  // mean squared error per embedding component

    void validate() const;
};

struct DistilledPrimitive {
    SymbolCode code;
    ActionParams action{};
    double residual = 0.0;
    bool accepted = false;
    std::string label;
};

/// Gradient search over action parameters against the frozen encoder: target
/// embedding is 2*code-1, each seed descends with parameters clamped to the
/// sampling box, best-so-far iterate kept; returns the best seed's result.
DistilledPrimitive distill(const model::ModelParams& params, const SymbolCode& code,
                           const std::vector<ActionParams>& seed_actions, const DistillConfig& cfg);

/// Executes the primitive on a canonical centered solid object and classifies
/// the measured effect signature.
std::string annotate(const DistilledPrimitive& primitive, const world::WorldConfig& world_cfg);

struct PrimitiveLibrary {
    std::vector<DistilledPrimitive> primitives;  // accepted and annotated
    std::vector<SymbolCount> action_symbols;     // all observed action codes
    std::vector<SymbolCount> object_symbols;
    std::uint64_t config_hash = 0;
};

/// enumerate -> distill (seeds drawn from the training dataset) -> annotate.
PrimitiveLibrary build_library(const model::ModelParams& params, const Dataset& training_set,
                               const world::WorldConfig& world_cfg, const DistillConfig& cfg,
                               std::uint64_t seed);

void save_library(const std::filesystem::path& path, const PrimitiveLibrary& lib);
PrimitiveLibrary load_library(const std::filesystem::path& path);

}  // namespace curio::symbols
