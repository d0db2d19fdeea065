#pragma once

namespace faith::cli {

// The faith command-line entry point, callable in-process so tests can drive
// whole pipelines. Returns the process exit code: 0 success, 1 runtime
// failure (one "error: ..." line on stderr), 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace faith::cli
