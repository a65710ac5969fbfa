#include "heatctl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "heatctl/null_control.hpp"
#include "heatctl/observability.hpp"
#include "heatctl/report.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/time_optimal.hpp"

namespace heatctl {

namespace {

using nlohmann::json;

json finite_or_tag(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "overflow" : "-overflow";
}

struct Pipeline {
  const RunConfig& cfg;
  ArtifactIndex index;
  bool write = true;

  json summary;
  std::string reason;
  int exit_code = kExitOk;

  void emit_json(const std::string& name, const json& j) {
    if (write && cfg.output.json) write_json_file(index, name, j);
  }
  void emit_csv(const std::string& name, const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows) {
    if (write && cfg.output.csv) write_csv_file(index, name, header, rows);
  }
  void emit_plot(const std::string& name,
                 const std::vector<std::pair<double, double>>& series) {
    if (write && cfg.output.plot) write_plot_file(index, name, series);
  }
};

DensitySequenceOptions density_options(const SolverConfig& s) {
  DensitySequenceOptions opt;
  opt.q = s.q;
  opt.depth = s.depth;
  opt.margin = s.margin;
  opt.start_fraction = s.start_fraction;
  return opt;
}

ControlConstraint config_bound(const RunConfig& cfg) {
  ControlConstraint bound = ControlConstraint::ball(cfg.problem.modes,
                                                    cfg.constraint.radius);
  if (!cfg.constraint.center.empty())
    for (int i = 0; i < cfg.problem.modes; ++i)
      bound.center.coeffs[i] = cfg.constraint.center[static_cast<std::size_t>(i)];
  return bound;
}

TargetSet config_target(const RunConfig& cfg) {
  if (cfg.constraint.target_kind == "point-zero")
    return TargetSet::point_zero(cfg.problem.modes);
  SpectralState center = SpectralState::zero(cfg.problem.modes);
  if (!cfg.constraint.target_center.empty())
    for (int i = 0; i < cfg.problem.modes; ++i)
      center.coeffs[i] = cfg.constraint.target_center[static_cast<std::size_t>(i)];
  return TargetSet::ball(center, cfg.constraint.target_radius);
}

// Rows of (t, ||u(t)||, ||chi_omega u(t)||_G, ||y(t)||) at every breakpoint,
// with the state re-simulated through the exact integrator.
std::vector<std::vector<double>> control_state_trace(const EigenBasis& basis,
                                                     const SpectralState& y0,
                                                     const ControlSignal& u,
                                                     const OmegaGramian& g) {
  std::vector<std::vector<double>> rows;
  SpectralState y = y0;
  const int k_steps = u.steps();
  auto norms_at = [&](int k) {
    int kk = std::clamp(k, 0, std::max(0, k_steps - 1));
    if (k_steps == 0) return std::pair<double, double>{0.0, 0.0};
    return std::pair<double, double>{u.step_norm(kk), u.restricted_step_norm(kk, g)};
  };
  auto [n0, gn0] = norms_at(0);
  rows.push_back({u.start(), n0, gn0, y.norm()});
  for (int k = 0; k < k_steps; ++k) {
    double a = u.time_grid[static_cast<std::size_t>(k)];
    double b = u.time_grid[static_cast<std::size_t>(k) + 1];
    y = evolve_controlled(basis, y, u, u.support, g, a, b);
    auto [nu, gnu] = norms_at(k + 1);
    rows.push_back({b, nu, gnu, y.norm()});
  }
  return rows;
}

json ledger_to_json(const ConstantsLedger& led) {
  json j;
  j["c1"] = led.c1;
  j["c2"] = led.c2;
  j["rho"] = led.rho;
  j["c0"] = led.c0;
  j["t2_minus_t1"] = led.t2_minus_t1;
  j["t3_minus_t2"] = led.t3_minus_t2;
  j["c_tilde"] = led.c_tilde;
  j["n0"] = led.n0;
  j["n1"] = led.n1;
  j["n2"] = led.n2;
  j["log_l"] = led.log_l;
  j["big_l"] = finite_or_tag(led.big_l());
  j["delta0"] = led.delta0;
  j["log_r"] = led.log_r;
  j["log_alpha"] = led.log_alpha;
  j["r1"] = finite_or_tag(led.r(1));
  return j;
}

void run_constants(Pipeline& p) {
  TimeSet e = config_time_set(p.cfg.problem);
  DensitySequence seq = build_density_sequence(e, density_options(p.cfg.solver));
  DensityReport rep = verify_density_sequence(seq, e);
  ConstantsLedger led = schedule_constants(p.cfg.solver.c1, p.cfg.solver.c2, seq);
  DeltaInvarianceReport inv = delta_invariance_check(
      seq, p.cfg.solver.c1, p.cfg.solver.c2, {0.0, 0.5 * seq.t1(), seq.t1()});

  json& s = p.summary;
  s["density"] = {{"t1", seq.t1()},     {"t_tilde", seq.t_tilde()},
                  {"rho", seq.rho()},   {"c0", seq.c0()},
                  {"points", seq.points()}, {"verified", rep.ok()},
                  {"tightest_rho", rep.tightest_rho},
                  {"tightest_c0", rep.tightest_c0}};
  s["ledger"] = ledger_to_json(led);
  s["delta_invariance"] = {{"all_equal", inv.all_equal},
                           {"deltas", {0.0, 0.5 * seq.t1(), seq.t1()}}};
  s["headline"] = {{"c_tilde", led.c_tilde},
                   {"log_l", led.log_l},
                   {"n0", led.n0},
                   {"delta_invariant", inv.all_equal ? 1.0 : 0.0}};

  std::vector<std::vector<double>> rows;
  for (std::size_t n = 0; n < led.log_r.size(); ++n)
    rows.push_back({static_cast<double>(n + 1), led.log_r[n],
                    n < led.log_alpha.size() ? led.log_alpha[n] : 0.0});
  p.emit_csv("constants_stages.csv", {"stage", "log_r", "log_alpha"}, rows);
  std::vector<std::pair<double, double>> pts;
  std::vector<double> points = seq.points();
  for (std::size_t i = 0; i < points.size(); ++i)
    pts.emplace_back(static_cast<double>(i + 1), points[i]);
  p.emit_plot("density_points.dat", pts);
  p.emit_json("constants.json", s);

  if (!rep.ok()) {
    p.exit_code = kExitNoConvergence;
    p.reason = "density sequence verification failed";
  }
}

void run_null_control(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  EigenBasis basis = build_basis(cfg.problem.modes, cfg.problem.length);
  OmegaGramian g = omega_gramian(basis, cfg.problem.omega_lo, cfg.problem.omega_hi);
  TimeSet e = config_time_set(cfg.problem);
  SpectralState y0 = config_initial_state(cfg.problem);
  DensitySequence seq = build_density_sequence(e, density_options(cfg.solver));
  ConstantsLedger led = schedule_constants(cfg.solver.c1, cfg.solver.c2, seq);

  AssemblerOptions opt;
  opt.stop_tol = cfg.solver.stop_tol;
  opt.max_stages = cfg.solver.max_stages;
  opt.grid_steps_per_stage = cfg.solver.grid_steps_per_stage;
  opt.literal_schedule = cfg.solver.schedule == "literal";
  opt.ledger = &led;

  NullControlResult res = iterative_null_control(basis, y0, e, cfg.problem.horizon,
                                                 cfg.solver.delta, seq, g, opt);

  json stages = json::array();
  for (const StageResult& st : res.stages) {
    stages.push_back({{"stage", st.stage},
                      {"r", st.r},
                      {"t_start", st.t_start},
                      {"t_mid", st.t_mid},
                      {"t_end", st.t_end},
                      {"residual", st.residual},
                      {"sup_norm", st.sup_norm},
                      {"state_norm_in", st.state_norm_in},
                      {"state_norm_mid", st.state_norm_mid},
                      {"state_norm_out", st.state_norm_out},
                      {"free_decay_ok", st.free_decay_ok}});
  }
  double ratio = res.y0_norm > 0.0 ? res.final_norm / res.y0_norm : 0.0;
  p.summary["converged"] = res.converged;
  p.summary["stages_run"] = res.stages_run;
  p.summary["y0_norm"] = res.y0_norm;
  p.summary["final_norm"] = res.final_norm;
  p.summary["final_ratio"] = ratio;
  p.summary["control_sup_norm"] = res.control.sup_norm();
  p.summary["stages"] = stages;
  p.summary["headline"] = {{"final_ratio", ratio},
                           {"stages_run", static_cast<double>(res.stages_run)},
                           {"control_sup_norm", res.control.sup_norm()}};

  std::vector<std::vector<double>> trace =
      control_state_trace(basis, y0, res.control, g);
  p.emit_csv("control_trace.csv", {"t", "u_norm", "u_omega_norm", "y_norm"}, trace);
  std::vector<std::pair<double, double>> u_curve, y_curve;
  for (const auto& row : trace) {
    u_curve.emplace_back(row[0], row[1]);
    y_curve.emplace_back(row[0], row[3]);
  }
  p.emit_plot("control_norm.dat", u_curve);
  p.emit_plot("state_norm.dat", y_curve);
  p.emit_json("null_control.json", p.summary);

  if (!res.converged) {
    p.exit_code = kExitNoConvergence;
    p.reason = "null-control assembler did not reach the stop tolerance";
  }
}

void run_spectral_ineq(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  EigenBasis basis = build_basis(cfg.problem.modes, cfg.problem.length);
  OmegaGramian g = omega_gramian(basis, cfg.problem.omega_lo, cfg.problem.omega_hi);

  std::vector<double> r_grid = cfg.solver.r_grid;
  if (r_grid.empty()) {
    // the smallest eigenvalue of the restricted Gramian decays exponentially
    // with the block size, so the default grid stays within the range where
    // it is resolvable in double precision
    int top = std::min(cfg.problem.modes, 16);
    int pts = std::min(8, top);
    for (int j = 1; j <= pts; ++j) {
      int mode = std::max(1, top * j / pts);
      r_grid.push_back(basis.lambda(mode));
    }
    std::sort(r_grid.begin(), r_grid.end());
    r_grid.erase(std::unique(r_grid.begin(), r_grid.end()), r_grid.end());
  }
  SpectralIneqFit fit = fit_lebeau_zuazua(basis, g, r_grid);

  bool monotone = true;
  for (std::size_t i = 1; i < fit.constants.size(); ++i)
    if (fit.constants[i] < fit.constants[i - 1] * (1.0 - 1e-12)) monotone = false;

  p.summary["r_grid"] = fit.r_grid;
  p.summary["constants"] = fit.constants;
  p.summary["c1_hat"] = fit.c1_hat;
  p.summary["c1_hat_raw"] = fit.c1_hat_raw;
  p.summary["c2_hat"] = fit.c2_hat;
  p.summary["fit_residual"] = fit.fit_residual;
  p.summary["monotone"] = monotone;
  p.summary["headline"] = {{"c1_hat", fit.c1_hat},
                           {"c2_hat", fit.c2_hat},
                           {"fit_residual", fit.fit_residual}};

  std::vector<std::vector<double>> rows;
  std::vector<std::pair<double, double>> curve;
  for (std::size_t i = 0; i < fit.r_grid.size(); ++i) {
    double r = fit.r_grid[i], c = fit.constants[i];
    rows.push_back({r, std::sqrt(r), c, std::log(c)});
    curve.emplace_back(std::sqrt(r), std::log(c));
  }
  p.emit_csv("spectral_ineq.csv", {"r", "sqrt_r", "c_r", "log_c_r"}, rows);
  p.emit_plot("spectral_ineq.dat", curve);
  p.emit_json("spectral_ineq.json", p.summary);
}

void run_observability(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  EigenBasis basis = build_basis(cfg.problem.modes, cfg.problem.length);
  OmegaGramian g = omega_gramian(basis, cfg.problem.omega_lo, cfg.problem.omega_hi);
  TimeSet e = config_time_set(cfg.problem);
  int modes = std::min(cfg.solver.observability_modes, cfg.problem.modes);

  QuadraticObservability quad =
      observability_constant_quadratic(basis, e, g, cfg.problem.horizon, modes);
  L1ObservabilityOptions lopt;
  lopt.modes = modes;
  lopt.panels_per_component = cfg.solver.panels_per_component;
  lopt.starts = cfg.solver.l1_starts;
  lopt.seed = cfg.seed;
  L1Observability l1 =
      observability_constant_l1(basis, e, g, cfg.problem.horizon, lopt);

  p.summary["modes"] = modes;
  p.summary["quadratic"] = {{"value", quad.value},
                            {"iterations", quad.iterations},
                            {"residual", quad.residual}};
  p.summary["l1"] = {{"lower_bound", l1.lower_bound},
                     {"iterations", l1.iterations},
                     {"stagnated", l1.stagnated}};
  p.summary["headline"] = {{"c_quadratic", quad.value},
                           {"l1_lower_bound", l1.lower_bound}};
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < quad.witness.size(); ++i)
    rows.push_back({static_cast<double>(i + 1), quad.witness[i],
                    i < l1.witness.size() ? l1.witness[i] : 0.0});
  p.emit_csv("observability_witness.csv", {"mode", "quadratic", "l1"}, rows);
  p.emit_json("observability.json", p.summary);
}

void run_time_optimal(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  EigenBasis basis = build_basis(cfg.problem.modes, cfg.problem.length);
  OmegaGramian g = omega_gramian(basis, cfg.problem.omega_lo, cfg.problem.omega_hi);
  TimeSet e = config_time_set(cfg.problem);
  SpectralState y0 = config_initial_state(cfg.problem);
  ControlConstraint bound = config_bound(cfg);
  TargetSet target = config_target(cfg);

  OptimalTimeOptions opt;
  opt.tol_t = cfg.solver.tol_t;
  opt.reach_tol = cfg.solver.reach_tol;
  opt.bracket_start = cfg.solver.bracket_start;
  opt.bracket_cap = cfg.solver.bracket_cap;
  opt.reach.max_iterations = cfg.solver.max_iterations;
  opt.reach.seed = cfg.seed;
  opt.reach.random_init = true;

  OptimalResult res = optimal_time(basis, y0, target, bound, e, g,
                                   cfg.solver.steps, opt);
  BangBangReport bb = bang_bang_report(res.control, bound, cfg.solver.band, &g);

  p.summary["admissible"] = res.admissible;
  p.summary["t_star"] = res.t_star;
  p.summary["residual"] = res.residual;
  p.summary["bang_bang_fraction"] = bb.fraction_full;
  p.summary["bang_bang_fraction_restricted"] = bb.fraction_restricted;
  p.summary["necessary_bound"] = res.necessary_bound;
  p.summary["target_center_norm"] = res.target_center_norm;
  p.summary["bisection_iterations"] = res.bisection_iterations;
  p.summary["failure_reason"] = res.failure_reason;
  p.summary["headline"] = {{"t_star", res.t_star},
                           {"bang_bang_fraction", bb.fraction_full},
                           {"residual", res.residual}};

  if (res.control.steps() > 0) {
    std::vector<std::vector<double>> trace =
        control_state_trace(basis, y0, res.control, g);
    p.emit_csv("control_trace.csv", {"t", "u_norm", "u_omega_norm", "y_norm"},
               trace);
    std::vector<std::pair<double, double>> u_curve, y_curve;
    for (const auto& row : trace) {
      u_curve.emplace_back(row[0], row[1]);
      y_curve.emplace_back(row[0], row[3]);
    }
    p.emit_plot("control_norm.dat", u_curve);
    p.emit_plot("state_norm.dat", y_curve);
  }
  p.emit_json("time_optimal.json", p.summary);

  if (!res.admissible) {
    p.exit_code = kExitNotAdmissible;
    p.reason = res.failure_reason.empty() ? "no admissible control"
                                          : res.failure_reason;
  }
}

void run_improve(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  EigenBasis basis = build_basis(cfg.problem.modes, cfg.problem.length);
  OmegaGramian g = omega_gramian(basis, cfg.problem.omega_lo, cfg.problem.omega_hi);
  TimeSet e = config_time_set(cfg.problem);
  SpectralState y0 = config_initial_state(cfg.problem);
  ControlConstraint bound = config_bound(cfg);
  TargetSet target = config_target(cfg);
  const double eps = cfg.solver.eps * bound.radius;

  // Baseline control with built-in slack: minimum-norm feasible control for
  // the shrunken radius R - eps, so the improvement precondition holds.
  ControlConstraint shrunk = bound;
  shrunk.radius = std::max(0.0, bound.radius - eps);
  ReachOptions ropt;
  ropt.seed = cfg.seed;
  ropt.max_iterations = cfg.solver.max_iterations;
  ReachResult base = reach_feasible(basis, cfg.problem.horizon, shrunk, y0, target,
                                    TimeSet::full(cfg.problem.horizon), g,
                                    cfg.solver.steps, cfg.solver.reach_tol, ropt);
  if (!base.feasible) {
    p.exit_code = kExitNotAdmissible;
    p.reason = "no admissible control with the required slack";
    p.summary["headline"] = json::object();
    p.emit_json("improve.json", p.summary);
    return;
  }

  DensitySequence seq = build_density_sequence(e, density_options(cfg.solver));
  ConstantsLedger led = schedule_constants(cfg.solver.c1, cfg.solver.c2, seq);
  ImproveOptions iopt;
  iopt.grid_steps_per_stage = cfg.solver.grid_steps_per_stage;
  iopt.max_stages = cfg.solver.max_stages;
  ImproveResult res = improve_control(basis, base.control, cfg.problem.horizon, y0,
                                      bound, e, eps, led, seq, g, iopt);

  p.summary["ok"] = res.ok;
  p.summary["delta"] = res.delta;
  p.summary["reconstruction_error"] = res.reconstruction_error;
  p.summary["added_control_sup"] = res.added_control_sup;
  p.summary["sup_norm"] = res.sup_norm;
  p.summary["failure_reason"] = res.failure_reason;
  p.summary["baseline_sup_norm"] = base.control.sup_norm();
  p.summary["headline"] = {{"delta", res.delta},
                           {"reconstruction_error", res.reconstruction_error}};

  if (res.ok) {
    std::vector<std::vector<double>> trace =
        control_state_trace(basis, y0, res.v_delta, g);
    p.emit_csv("improved_trace.csv", {"t", "u_norm", "u_omega_norm", "y_norm"},
               trace);
  }
  p.emit_json("improve.json", p.summary);

  if (!res.ok) {
    bool precondition = res.failure_reason.find("slack") != std::string::npos ||
                        res.failure_reason.find("grid") != std::string::npos;
    p.exit_code = precondition ? kExitValidation : kExitNoConvergence;
    p.reason = res.failure_reason;
  }
}

RunConfig apply_axis(const RunConfig& base, const std::string& axis, double value) {
  RunConfig cfg = base;
  cfg.sweep.reset();
  if (axis == "delta") {
    cfg.solver.delta = value;
  } else if (axis == "radius") {
    cfg.constraint.radius = value;
  } else if (axis == "modes") {
    cfg.problem.modes = static_cast<int>(value);
    if (cfg.problem.modes < 1) throw ConfigError("sweep: modes value < 1");
    cfg.problem.y0_coefficients.clear();
    cfg.constraint.center.clear();
    cfg.constraint.target_center.clear();
  } else if (axis == "horizon") {
    if (value <= 0.0) throw ConfigError("sweep: horizon value <= 0");
    cfg.problem.horizon = value;
    std::vector<Interval> clipped;
    for (Interval c : cfg.problem.e_intervals) {
      c.hi = std::min(c.hi, value);
      if (c.hi > c.lo) clipped.push_back(c);
    }
    cfg.problem.e_intervals = clipped;
  } else {  // omega-width
    double mid = 0.5 * (cfg.problem.omega_lo + cfg.problem.omega_hi);
    double half = 0.5 * value;
    cfg.problem.omega_lo = std::max(1e-6, mid - half);
    cfg.problem.omega_hi = std::min(cfg.problem.length - 1e-6, mid + half);
    if (cfg.problem.omega_lo >= cfg.problem.omega_hi)
      throw ConfigError("sweep: omega-width value collapses omega");
  }
  return cfg;
}

void run_sweep(Pipeline& p) {
  const RunConfig& cfg = p.cfg;
  if (!cfg.sweep) throw ConfigError("sweep requires a sweep block in the config");
  const SweepConfig& sw = *cfg.sweep;
  if (sw.subcommand == "sweep") throw ConfigError("sweep cannot nest sweeps");

  std::vector<double> values = sw.values;
  std::stable_sort(values.begin(), values.end());

  std::vector<std::string> headline_keys;
  json rows = json::array();
  for (double v : values) {
    json row;
    row["value"] = v;
    try {
      RunConfig member = apply_axis(cfg, sw.axis, v);
      RunResult r = run_subcommand(sw.subcommand, member, false);
      row["exit_code"] = r.exit_code;
      row["reason"] = r.reason;
      row["headline"] = r.summary.value("headline", json::object());
    } catch (const std::exception& ex) {
      row["exit_code"] = kExitValidation;
      row["reason"] = ex.what();
      row["headline"] = json::object();
    }
    if (headline_keys.empty())
      for (auto it = row["headline"].begin(); it != row["headline"].end(); ++it)
        headline_keys.push_back(it.key());
    rows.push_back(row);
  }
  std::sort(headline_keys.begin(), headline_keys.end());

  p.summary["axis"] = sw.axis;
  p.summary["subcommand"] = sw.subcommand;
  p.summary["rows"] = rows;
  p.summary["headline"] = {{"rows", static_cast<double>(rows.size())}};

  std::vector<std::string> header = {sw.axis, "exit_code"};
  header.insert(header.end(), headline_keys.begin(), headline_keys.end());
  std::vector<std::vector<double>> csv_rows;
  for (const json& row : rows) {
    std::vector<double> out = {row["value"].get<double>(),
                               static_cast<double>(row["exit_code"].get<int>())};
    for (const std::string& key : headline_keys) {
      const json& h = row["headline"];
      out.push_back(h.contains(key) && h[key].is_number()
                        ? h[key].get<double>()
                        : std::nan(""));
    }
    csv_rows.push_back(out);
  }
  p.emit_csv("sweep.csv", header, csv_rows);
  p.emit_json("sweep.json", p.summary);
}

}  // namespace

RunResult run_subcommand(const std::string& name, const RunConfig& cfg,
                         bool write_outputs) {
  Pipeline p{cfg, ArtifactIndex{cfg.output.directory, {}}, write_outputs};
  RunManifest manifest;
  manifest.subcommand = name;
  manifest.config_snapshot = config_to_json(cfg);
  manifest.started_at = current_timestamp();
  auto t0 = std::chrono::steady_clock::now();

  p.summary["schema_version"] = kSchemaVersion;
  p.summary["subcommand"] = name;
  p.summary["seed"] = cfg.seed;

  try {
    if (name == "constants")
      run_constants(p);
    else if (name == "null-control")
      run_null_control(p);
    else if (name == "spectral-ineq")
      run_spectral_ineq(p);
    else if (name == "observability")
      run_observability(p);
    else if (name == "time-optimal")
      run_time_optimal(p);
    else if (name == "improve")
      run_improve(p);
    else if (name == "sweep")
      run_sweep(p);
    else
      throw ConfigError("unknown subcommand: " + name);
  } catch (const ConfigError& ex) {
    p.exit_code = kExitValidation;
    p.reason = ex.what();
  } catch (const std::invalid_argument& ex) {
    p.exit_code = kExitValidation;
    p.reason = ex.what();
  } catch (const std::exception& ex) {
    p.exit_code = kExitNoConvergence;
    p.reason = ex.what();
  }

  manifest.finished_at = current_timestamp();
  manifest.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.exit_code = p.exit_code;
  manifest.reason = p.reason;
  if (write_outputs) write_manifest(p.index, manifest);

  RunResult result;
  result.exit_code = p.exit_code;
  result.summary = p.summary;
  result.reason = p.reason;
  return result;
}

}  // namespace heatctl
