#pragma once

#include <string>

#include <json.hpp>

#include "heatctl/config.hpp"

namespace heatctl {

// Exit code conventions shared by the CLI and the sweep aggregator.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitNotAdmissible = 4;

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json summary;
  std::string reason;  // empty on success
};

// Executes one pipeline: null-control | time-optimal | observability |
// spectral-ineq | improve | constants | sweep. When write_outputs is set,
// JSON/CSV/plot artifacts and the run manifest land in config.output.directory.
RunResult run_subcommand(const std::string& name, const RunConfig& cfg,
                         bool write_outputs = true);

}  // namespace heatctl
