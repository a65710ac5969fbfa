#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatctl/spectral.hpp"
#include "heatctl/time_sets.hpp"

namespace heatctl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  int modes = 32;
  double length = 1.0;
  double omega_lo = 0.25;
  double omega_hi = 0.75;
  std::vector<Interval> e_intervals;  // empty = full [0, horizon]
  double horizon = 1.0;
  std::string y0_preset = "decay";    // decay | uniform | mode1
  std::vector<double> y0_coefficients;  // overrides the preset when nonempty
};

struct SolverConfig {
  int steps = 100;                 // time steps for reach/optimal solves
  int grid_steps_per_stage = 64;
  double stop_tol = 1e-8;
  int max_stages = 8;
  std::string schedule = "practical";  // practical | literal
  double q = 0.5;
  int depth = 16;
  double margin = 0.0;
  double start_fraction = 1.0 / 3.0;
  double delta = 0.0;
  double c1 = 1.0;
  double c2 = 0.05;
  double reach_tol = 1e-6;
  double tol_t = -1.0;
  int max_iterations = 5000;
  double bracket_start = 1.0;
  double bracket_cap = 64.0;
  double eps = 0.1;                // slack for improve, as a fraction of R
  double band = 1e-2;              // bang-bang band, relative to R
  std::vector<double> r_grid;      // spectral-ineq grid; empty = default
  int observability_modes = 8;
  int panels_per_component = 512;
  int l1_starts = 8;
};

struct ConstraintConfig {
  double radius = 1.0;
  std::vector<double> center;        // v0 coefficients; empty = zero
  std::string target_kind = "point-zero";  // point-zero | ball
  std::vector<double> target_center;
  double target_radius = 0.0;
};

struct OutputConfig {
  std::string directory = ".";
  bool json = true;
  bool csv = true;
  bool plot = true;
};

struct SweepConfig {
  std::string axis;  // delta | radius | modes | horizon | omega-width
  std::vector<double> values;
  std::string subcommand;
};

struct RunConfig {
  ProblemConfig problem;
  SolverConfig solver;
  ConstraintConfig constraint;
  OutputConfig output;
  std::uint64_t seed = 12345;
  std::optional<SweepConfig> sweep;
};

// Parses and validates; unknown keys anywhere are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);

// Derived objects, validated against module preconditions.
TimeSet config_time_set(const ProblemConfig& p);
SpectralState config_initial_state(const ProblemConfig& p);

}  // namespace heatctl
