#include "heatctl/config.hpp"

#include <cmath>
#include <fstream>

namespace heatctl {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<Interval> read_intervals(const json& j, const std::string& where) {
  std::vector<Interval> out;
  if (!j.is_array()) throw ConfigError(where + ": expected an array of [lo, hi]");
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2)
      throw ConfigError(where + ": each entry must be [lo, hi]");
    out.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  return out;
}

ProblemConfig parse_problem(const json& j) {
  ProblemConfig p;
  reject_unknown(j, "problem",
                 {"modes", "length", "omega", "e_intervals", "horizon", "y0"});
  read(j, "modes", p.modes);
  read(j, "length", p.length);
  read(j, "horizon", p.horizon);
  if (j.contains("omega")) {
    const json& om = j.at("omega");
    if (!om.is_array() || om.size() != 2)
      throw ConfigError("problem.omega: expected [lo, hi]");
    p.omega_lo = om[0].get<double>();
    p.omega_hi = om[1].get<double>();
  }
  if (j.contains("e_intervals"))
    p.e_intervals = read_intervals(j.at("e_intervals"), "problem.e_intervals");
  if (j.contains("y0")) {
    const json& y = j.at("y0");
    reject_unknown(y, "problem.y0", {"preset", "coefficients"});
    read(y, "preset", p.y0_preset);
    read(y, "coefficients", p.y0_coefficients);
  }
  if (p.modes < 1) throw ConfigError("problem.modes must be >= 1");
  if (p.length <= 0.0) throw ConfigError("problem.length must be positive");
  if (p.horizon <= 0.0) throw ConfigError("problem.horizon must be positive");
  if (!(p.omega_lo >= 0.0 && p.omega_lo < p.omega_hi && p.omega_hi <= p.length))
    throw ConfigError("problem.omega must satisfy 0 <= lo < hi <= length");
  for (const Interval& c : p.e_intervals)
    if (!(c.lo >= 0.0 && c.lo <= c.hi && c.hi <= p.horizon + 1e-12))
      throw ConfigError("problem.e_intervals must lie within [0, horizon]");
  return p;
}

SolverConfig parse_solver(const json& j) {
  SolverConfig s;
  reject_unknown(
      j, "solver",
      {"steps", "grid_steps_per_stage", "stop_tol", "max_stages", "schedule", "q",
       "depth", "margin", "start_fraction", "delta", "c1", "c2", "reach_tol",
       "tol_t", "max_iterations", "bracket_start", "bracket_cap", "eps", "band",
       "r_grid", "observability_modes", "panels_per_component", "l1_starts"});
  read(j, "steps", s.steps);
  read(j, "grid_steps_per_stage", s.grid_steps_per_stage);
  read(j, "stop_tol", s.stop_tol);
  read(j, "max_stages", s.max_stages);
  read(j, "schedule", s.schedule);
  read(j, "q", s.q);
  read(j, "depth", s.depth);
  read(j, "margin", s.margin);
  read(j, "start_fraction", s.start_fraction);
  read(j, "delta", s.delta);
  read(j, "c1", s.c1);
  read(j, "c2", s.c2);
  read(j, "reach_tol", s.reach_tol);
  read(j, "tol_t", s.tol_t);
  read(j, "max_iterations", s.max_iterations);
  read(j, "bracket_start", s.bracket_start);
  read(j, "bracket_cap", s.bracket_cap);
  read(j, "eps", s.eps);
  read(j, "band", s.band);
  read(j, "r_grid", s.r_grid);
  read(j, "observability_modes", s.observability_modes);
  read(j, "panels_per_component", s.panels_per_component);
  read(j, "l1_starts", s.l1_starts);
  if (s.steps < 1) throw ConfigError("solver.steps must be >= 1");
  if (s.grid_steps_per_stage < 1)
    throw ConfigError("solver.grid_steps_per_stage must be >= 1");
  if (!(s.q > 0.0 && s.q < 1.0)) throw ConfigError("solver.q must lie in (0,1)");
  if (s.depth < 3) throw ConfigError("solver.depth must be >= 3");
  if (s.schedule != "practical" && s.schedule != "literal")
    throw ConfigError("solver.schedule must be 'practical' or 'literal'");
  if (s.delta < 0.0) throw ConfigError("solver.delta must be >= 0");
  if (s.reach_tol <= 0.0) throw ConfigError("solver.reach_tol must be positive");
  if (s.eps <= 0.0 || s.eps > 1.0)
    throw ConfigError("solver.eps must lie in (0, 1]");
  return s;
}

ConstraintConfig parse_constraint(const json& j) {
  ConstraintConfig c;
  reject_unknown(j, "constraint",
                 {"radius", "center", "target_kind", "target_center",
                  "target_radius"});
  read(j, "radius", c.radius);
  read(j, "center", c.center);
  read(j, "target_kind", c.target_kind);
  read(j, "target_center", c.target_center);
  read(j, "target_radius", c.target_radius);
  if (c.radius < 0.0) throw ConfigError("constraint.radius must be >= 0");
  if (c.target_kind != "point-zero" && c.target_kind != "ball")
    throw ConfigError("constraint.target_kind must be 'point-zero' or 'ball'");
  if (c.target_radius < 0.0)
    throw ConfigError("constraint.target_radius must be >= 0");
  return c;
}

OutputConfig parse_output(const json& j) {
  OutputConfig o;
  reject_unknown(j, "output", {"directory", "formats"});
  read(j, "directory", o.directory);
  if (j.contains("formats")) {
    o.json = o.csv = o.plot = false;
    for (const auto& f : j.at("formats")) {
      std::string name = f.get<std::string>();
      if (name == "json")
        o.json = true;
      else if (name == "csv")
        o.csv = true;
      else if (name == "plot")
        o.plot = true;
      else
        throw ConfigError("output.formats: unknown format '" + name + "'");
    }
  }
  return o;
}

SweepConfig parse_sweep(const json& j) {
  SweepConfig s;
  reject_unknown(j, "sweep", {"axis", "values", "subcommand"});
  read(j, "axis", s.axis);
  read(j, "values", s.values);
  read(j, "subcommand", s.subcommand);
  static const char* axes[] = {"delta", "radius", "modes", "horizon",
                               "omega-width"};
  bool ok = false;
  for (const char* a : axes) ok = ok || s.axis == a;
  if (!ok) throw ConfigError("sweep.axis must be one of delta|radius|modes|horizon|omega-width");
  if (s.values.empty()) throw ConfigError("sweep.values must be nonempty");
  for (double v : s.values)
    if (!std::isfinite(v)) throw ConfigError("sweep.values must be finite");
  if (s.subcommand.empty()) throw ConfigError("sweep.subcommand is required");
  return s;
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  reject_unknown(j, "config",
                 {"problem", "solver", "constraint", "output", "seed", "sweep"});
  if (j.contains("problem")) cfg.problem = parse_problem(j.at("problem"));
  if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
  if (j.contains("constraint")) cfg.constraint = parse_constraint(j.at("constraint"));
  if (j.contains("output")) cfg.output = parse_output(j.at("output"));
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"));

  auto check_coeffs = [&](const std::vector<double>& v, const char* who) {
    if (!v.empty() && static_cast<int>(v.size()) != cfg.problem.modes)
      throw ConfigError(std::string(who) + " must have exactly problem.modes entries");
  };
  check_coeffs(cfg.problem.y0_coefficients, "problem.y0.coefficients");
  check_coeffs(cfg.constraint.center, "constraint.center");
  check_coeffs(cfg.constraint.target_center, "constraint.target_center");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw ConfigError("config parse error: " + std::string(ex.what()));
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["problem"] = {{"modes", cfg.problem.modes},
                  {"length", cfg.problem.length},
                  {"omega", {cfg.problem.omega_lo, cfg.problem.omega_hi}},
                  {"horizon", cfg.problem.horizon},
                  {"y0", {{"preset", cfg.problem.y0_preset},
                          {"coefficients", cfg.problem.y0_coefficients}}}};
  nlohmann::json e = nlohmann::json::array();
  for (const Interval& c : cfg.problem.e_intervals)
    e.push_back({c.lo, c.hi});
  j["problem"]["e_intervals"] = e;
  j["solver"] = {{"steps", cfg.solver.steps},
                 {"grid_steps_per_stage", cfg.solver.grid_steps_per_stage},
                 {"stop_tol", cfg.solver.stop_tol},
                 {"max_stages", cfg.solver.max_stages},
                 {"schedule", cfg.solver.schedule},
                 {"q", cfg.solver.q},
                 {"depth", cfg.solver.depth},
                 {"margin", cfg.solver.margin},
                 {"start_fraction", cfg.solver.start_fraction},
                 {"delta", cfg.solver.delta},
                 {"c1", cfg.solver.c1},
                 {"c2", cfg.solver.c2},
                 {"reach_tol", cfg.solver.reach_tol},
                 {"tol_t", cfg.solver.tol_t},
                 {"max_iterations", cfg.solver.max_iterations},
                 {"bracket_start", cfg.solver.bracket_start},
                 {"bracket_cap", cfg.solver.bracket_cap},
                 {"eps", cfg.solver.eps},
                 {"band", cfg.solver.band},
                 {"r_grid", cfg.solver.r_grid},
                 {"observability_modes", cfg.solver.observability_modes},
                 {"panels_per_component", cfg.solver.panels_per_component},
                 {"l1_starts", cfg.solver.l1_starts}};
  j["constraint"] = {{"radius", cfg.constraint.radius},
                     {"center", cfg.constraint.center},
                     {"target_kind", cfg.constraint.target_kind},
                     {"target_center", cfg.constraint.target_center},
                     {"target_radius", cfg.constraint.target_radius}};
  nlohmann::json formats = nlohmann::json::array();
  if (cfg.output.json) formats.push_back("json");
  if (cfg.output.csv) formats.push_back("csv");
  if (cfg.output.plot) formats.push_back("plot");
  j["output"] = {{"directory", cfg.output.directory}, {"formats", formats}};
  j["seed"] = cfg.seed;
  if (cfg.sweep) {
    j["sweep"] = {{"axis", cfg.sweep->axis},
                  {"values", cfg.sweep->values},
                  {"subcommand", cfg.sweep->subcommand}};
  }
  return j;
}

TimeSet config_time_set(const ProblemConfig& p) {
  if (p.e_intervals.empty()) return TimeSet::full(p.horizon);
  return TimeSet(p.e_intervals, p.horizon);
}

SpectralState config_initial_state(const ProblemConfig& p) {
  SpectralState y = SpectralState::zero(p.modes);
  if (!p.y0_coefficients.empty()) {
    for (int i = 0; i < p.modes; ++i)
      y.coeffs[i] = p.y0_coefficients[static_cast<std::size_t>(i)];
    return y;
  }
  if (p.y0_preset == "decay") {
    for (int i = 0; i < p.modes; ++i) y.coeffs[i] = 1.0 / (i + 1.0);
  } else if (p.y0_preset == "uniform") {
    y.coeffs.setOnes();
  } else if (p.y0_preset == "mode1") {
    y.coeffs[0] = 1.0;
  } else {
    throw ConfigError("problem.y0.preset must be decay | uniform | mode1");
  }
  return y;
}

}  // namespace heatctl
