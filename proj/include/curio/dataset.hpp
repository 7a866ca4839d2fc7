#pragma once

#include <cstdint>
#include <filesystem>

#include "curio/types.hpp"

namespace curio::dataset {

/// CSV with a config-hash comment line, a header row, and %.17g values so
/// load(save(d)) reproduces every double bit-exactly. Atomic write.
void save_csv(const std::filesystem::path& path, const Dataset& data, std::uint64_t config_hash);

Dataset load_csv(const std::filesystem::path& path, std::uint64_t* config_hash_out = nullptr);

/// Order-sensitive hash of all rows, for determinism checks.
std::uint64_t dataset_hash(const Dataset& data);

}  // namespace curio::dataset
