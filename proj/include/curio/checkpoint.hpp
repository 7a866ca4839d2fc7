#pragma once

#include <filesystem>

#include "curio/model.hpp"

namespace curio::ckpt {

struct Checkpoint {
    model::ModelParams params;
    std::uint64_t config_hash = 0;
};

/// Binary container: magic, JSON header (config, head mode, step counter,
/// tensor directory), raw f64 payload. Save is atomic; round-trip is
/// bit-exact.
void save(const std::filesystem::path& path, const model::ModelParams& params,
          std::uint64_t config_hash);

Checkpoint load(const std::filesystem::path& path);

}  // namespace curio::ckpt
