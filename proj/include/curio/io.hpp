#pragma once

#include <filesystem>
#include <string>

#include "curio/common.hpp"

namespace curio::io {

/// Whole-file read; ArtifactError if the file is missing or unreadable.
std::string read_file(const std::filesystem::path& path);

/// Temp-then-rename write so readers never observe a truncated file.
/// Creates parent directories as needed.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace curio::io
