#pragma once

namespace cpsdet {

// Full command-line pipeline: simulate | train | detect | evaluate |
// gradcheck | report. Returns the process exit code:
//   0 success, 2 usage error, 3 training divergence,
//   4 data/model mismatch, 5 gradient check failure, 1 other errors.
int run_cli(int argc, const char* const* argv);

}  // namespace cpsdet
