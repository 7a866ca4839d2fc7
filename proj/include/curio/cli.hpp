#pragma once

namespace curio::cli {

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 2 usage, 3 bad config, 4 missing/corrupt artifact, 5 bad input or domain
/// failure, 1 internal error.
int cli_main(int argc, const char* const* argv);

}  // namespace curio::cli
