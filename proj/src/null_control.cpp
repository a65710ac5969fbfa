#include "heatctl/null_control.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "heatctl/kernels.hpp"
#include "spd_solve.hpp"

namespace heatctl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStageCap = 64;
constexpr double kExpArgMax = 700.0;  // exp() overflow guard

double safe_exp(double x) { return x >= kExpArgMax ? kInf : std::exp(x); }
}  // namespace

double ConstantsLedger::r(int n) const {
  double lr = log_r.at(static_cast<std::size_t>(n - 1));
  if (lr >= kExpArgMax) return kInf;
  // direct product where it cannot overflow: exp(log(..)) loses the last ulp
  // on exactly representable values like (2/0.1)^4
  double a = 2.0 / t3_minus_t2;
  double p = a * a;
  p *= p;
  for (int j = 1; j < n; ++j) {
    double c = c_tilde * c_tilde;
    p *= c * c;
  }
  return p;
}
double ConstantsLedger::alpha(int n) const {
  return safe_exp(log_alpha.at(static_cast<std::size_t>(n - 1)));
}
double ConstantsLedger::big_l() const { return safe_exp(log_l); }

ConstantsLedger schedule_constants(double c1, double c2, const DensitySequence& seq) {
  if (seq.size() < 3)
    throw std::invalid_argument("schedule_constants: sequence needs >= 3 points");
  if (c2 < 0.0) throw std::invalid_argument("schedule_constants: c2 < 0");

  ConstantsLedger led;
  led.c1 = std::max(c1, 1.0);  // the construction assumes C1 >= 1
  led.c2 = c2;
  led.rho = seq.rho();
  led.c0 = seq.c0();
  led.t2_minus_t1 = seq.gaps()[0];
  led.t3_minus_t2 = seq.gaps()[1];
  led.delta0 = seq.t1();
  if (!(led.t3_minus_t2 < 1.0))
    throw std::invalid_argument("schedule_constants: t3 - t2 must be < 1");
  if (seq.t_tilde() - seq.t1() > 1.0 + 1e-12)
    throw std::invalid_argument("schedule_constants: t_tilde - t1 exceeds 1");

  // evaluation order matters: c0/(rho (t2-t1)) rounds exactly on round
  // decimal inputs (e.g. 2/0.2 = 10), where dividing by the squared gap does not
  {
    double ratio = led.c0 / (led.rho * led.t2_minus_t1);
    led.c_tilde = 2.0 * led.c1 * ratio * ratio;
  }
  const double log_ct = std::log(led.c_tilde);
  const double log_a = std::log(2.0 / led.t3_minus_t2);
  const double log_c0 = std::log(led.c0);

  led.log_r.resize(kStageCap);
  for (int n = 1; n <= kStageCap; ++n)
    led.log_r[static_cast<std::size_t>(n - 1)] = 4.0 * (log_a + (n - 1) * log_ct);

  led.log_alpha.resize(kStageCap);
  led.log_alpha[0] = c2 * safe_exp(0.5 * led.log_r[0]);
  for (int n = 2; n <= kStageCap; ++n) {
    // log alpha_N = c2 sqrt(r_N) - 2 r_{N-1} (t3-t2) C0^{-2(N-2)}
    double log_term1 = (c2 > 0.0 ? std::log(c2) : -kInf) +
                       0.5 * led.log_r[static_cast<std::size_t>(n - 1)];
    double log_term2 = std::log(2.0 * led.t3_minus_t2) +
                       led.log_r[static_cast<std::size_t>(n - 2)] -
                       2.0 * (n - 2) * log_c0;
    if (log_term1 < kExpArgMax && log_term2 < kExpArgMax)
      led.log_alpha[static_cast<std::size_t>(n - 1)] =
          std::exp(log_term1) - std::exp(log_term2);
    else
      led.log_alpha[static_cast<std::size_t>(n - 1)] =
          log_term2 >= log_term1 ? -kInf : kInf;
  }

  // N1: first N >= 2 with N(N-1) log(c_tilde) <= r_{N-1}^{3/4}, onward.
  // N2: first N >= 2 with log(c2) + sqrt(r_N) ... i.e. c2 sqrt(r_N) <= r_{N-1}^{3/4}.
  auto cond_n1 = [&](int n) {
    double lhs = n * (n - 1.0) * log_ct;
    if (lhs <= 0.0) return true;
    double log_rhs = 0.75 * led.log_r[static_cast<std::size_t>(n - 2)];
    return log_rhs >= kExpArgMax || lhs <= std::exp(log_rhs);
  };
  auto cond_n2 = [&](int n) {
    if (c2 == 0.0) return true;
    return std::log(c2) + 0.5 * led.log_r[static_cast<std::size_t>(n - 1)] <=
           0.75 * led.log_r[static_cast<std::size_t>(n - 2)];
  };
  auto first_onward = [&](auto cond) {
    for (int n = 2; n <= kStageCap; ++n) {
      bool ok = true;
      for (int k = n; k <= kStageCap; ++k)
        if (!cond(k)) {
          ok = false;
          break;
        }
      if (ok) return n;
    }
    return -1;
  };
  led.n1 = first_onward(cond_n1);
  led.n2 = first_onward(cond_n2);
  if (led.n1 < 0 || led.n2 < 0)
    throw std::runtime_error("schedule_constants: N0 search exceeded cap");
  led.n0 = std::max(led.n1, led.n2);

  double log_l = -kInf;
  double sum_log_alpha = 0.0;
  for (int n = 1; n <= led.n0; ++n) {
    sum_log_alpha += led.log_alpha[static_cast<std::size_t>(n - 1)];
    log_l = std::max(log_l, n * (n - 1.0) * log_ct + sum_log_alpha);
  }
  led.log_l = log_l;
  return led;
}

namespace {
bool ledgers_equal(const ConstantsLedger& a, const ConstantsLedger& b) {
  if (a.c_tilde != b.c_tilde || a.log_l != b.log_l || a.n0 != b.n0 ||
      a.n1 != b.n1 || a.n2 != b.n2)
    return false;
  for (std::size_t i = 0; i < a.log_r.size(); ++i) {
    if (a.log_r[i] != b.log_r[i]) return false;
    if (a.log_alpha[i] != b.log_alpha[i]) return false;
  }
  return true;
}
}  // namespace

DeltaInvarianceReport delta_invariance_check(const DensitySequence& seq, double c1,
                                             double c2,
                                             const std::vector<double>& deltas) {
  DeltaInvarianceReport rep;
  rep.base = schedule_constants(c1, c2, seq);
  for (double d : deltas) {
    DeltaInvarianceEntry entry;
    entry.delta = d;
    entry.ledger = schedule_constants(c1, c2, seq.shifted(d));
    entry.equal_to_base = ledgers_equal(rep.base, entry.ledger);
    if (!entry.equal_to_base) rep.all_equal = false;
    rep.entries.push_back(std::move(entry));
  }
  return rep;
}

Eigen::MatrixXd control_gramian(const EigenBasis& basis, const TimeSet& e, double a,
                                double b, const OmegaGramian& g, int mode_limit) {
  Eigen::MatrixXd lam(mode_limit, mode_limit);
  for (int i = 0; i < mode_limit; ++i)
    for (int j = i; j < mode_limit; ++j) {
      double v = g.matrix(i, j) *
                 exp_weight_integral(e, a, b, basis.lambda(i + 1) + basis.lambda(j + 1));
      lam(i, j) = v;
      lam(j, i) = v;
    }
  return lam;
}


FiniteRankResult finite_rank_control(const EigenBasis& basis,
                                     const SpectralState& y_init, double r,
                                     double a, double b, const TimeSet& e,
                                     const OmegaGramian& g, int grid_steps) {
  if (!(b > a)) throw std::invalid_argument("finite_rank_control: window reversed");
  if (grid_steps < 1) throw std::invalid_argument("finite_rank_control: grid_steps < 1");
  const int big_m = basis.mode_count();
  const int m = basis.modes_below(r);

  FiniteRankResult out;
  if (m == 0) {
    out.control = ControlSignal::zero(big_m, a, b, TimeSet::empty(b));
    out.adjoint_terminal = SpectralState::zero(big_m);
    out.state_end = free_evolve(basis, y_init, b - a);
    out.residual = 0.0;
    return out;
  }
  if (e.measure_within(a, b) <= 0.0)
    throw std::invalid_argument("finite_rank_control: E has zero measure in window");

  // Per-step exponential weights w_ik = int_{E cap step k} e^{-lambda_i (b-s)} ds.
  const int kk = grid_steps;
  std::vector<double> grid(static_cast<std::size_t>(kk) + 1);
  for (int k = 0; k <= kk; ++k)
    grid[static_cast<std::size_t>(k)] = a + (b - a) * k / kk;
  grid.back() = b;

  Eigen::MatrixXd w(m, kk);
  Eigen::VectorXd step_measure(kk);
  for (int k = 0; k < kk; ++k) {
    auto pieces = e.clipped(grid[static_cast<std::size_t>(k)],
                            grid[static_cast<std::size_t>(k) + 1]);
    double mk = 0.0;
    for (const auto& iv : pieces) mk += iv.length();
    step_measure(k) = mk;
    for (int i = 0; i < m; ++i)
      w(i, k) = mk > 0.0 ? exp_weight_integral(pieces, b, basis.lambda(i + 1)) : 0.0;
  }

  Eigen::MatrixXd lam;
  kernels::assemble_weighted_gramian(g.matrix.topLeftCorner(m, m), w, step_measure, lam);

  SpectralState freed = free_evolve(basis, y_init, b - a);
  Eigen::VectorXd rhs = -freed.coeffs.head(m);

  detail::SpdSolve sol = detail::solve_spd_with_jitter(lam, rhs, "finite_rank_control");

  ControlSignal u;
  u.time_grid = grid;
  u.coefficients = Eigen::MatrixXd::Zero(kk, big_m);
  for (int k = 0; k < kk; ++k) {
    if (step_measure(k) <= 0.0) continue;
    for (int j = 0; j < m; ++j)
      u.coefficients(k, j) = sol.x(j) * w(j, k) / step_measure(k);
  }
  u.support = TimeSet(e.clipped(a, b), b);

  out.control = std::move(u);
  out.adjoint_terminal = SpectralState::zero(big_m);
  out.adjoint_terminal.coeffs.head(m) = sol.x;
  out.state_end = evolve_controlled(basis, y_init, out.control, e, g, a, b);
  out.residual = project(basis, out.state_end, r).norm();
  out.sup_norm = out.control.sup_norm();
  out.condition_estimate = sol.condition;
  out.jitter_used = sol.jitter;
  return out;
}

namespace {

ControlSignal zero_piece(int modes, double a, double b) {
  return ControlSignal::zero(modes, a, b, TimeSet::empty(b));
}

}  // namespace

NullControlResult iterative_null_control(const EigenBasis& basis,
                                         const SpectralState& y0, const TimeSet& e,
                                         double big_t, double delta,
                                         const DensitySequence& seq,
                                         const OmegaGramian& g,
                                         const AssemblerOptions& opt) {
  if (delta < 0.0 || delta > seq.t1() + 1e-15)
    throw std::invalid_argument("iterative_null_control: delta outside [0, delta0]");
  if (seq.t_tilde() > big_t + 1e-12)
    throw std::invalid_argument("iterative_null_control: t_tilde beyond horizon");
  if (y0.modes() != basis.mode_count())
    throw std::invalid_argument("iterative_null_control: state/basis mode mismatch");

  const DensitySequence sseq = delta > 0.0 ? seq.shifted(delta) : seq;
  const TimeSet ed = delta > 0.0 ? e.shifted(delta) : e;
  auto density = verify_density_sequence(sseq, ed);
  if (!density.ok())
    throw std::invalid_argument(
        "iterative_null_control: density sequence fails verification against shifted E");

  const double horizon = big_t - delta;
  const int big_m = basis.mode_count();
  const auto pts = sseq.points();

  NullControlResult res;
  res.y0_norm = y0.norm();

  if (res.y0_norm == 0.0) {
    res.control = zero_piece(big_m, 0.0, horizon);
    res.final_state = SpectralState::zero(big_m);
    res.converged = true;
    res.trajectory = {{0.0, 0.0}, {horizon, 0.0}};
    return res;
  }

  auto pick_r = [&](int n) -> double {
    if (!opt.r_schedule.empty()) {
      if (static_cast<std::size_t>(n) > opt.r_schedule.size())
        throw std::invalid_argument("iterative_null_control: r schedule too short");
      return opt.r_schedule[static_cast<std::size_t>(n - 1)];
    }
    if (opt.literal_schedule) {
      if (opt.ledger == nullptr)
        throw std::invalid_argument(
            "iterative_null_control: literal schedule requires a ledger");
      double r = opt.ledger->r(n);
      if (!std::isfinite(r))
        throw std::runtime_error("iterative_null_control: literal r_N overflows");
      return r;
    }
    return basis.lambda(std::min(big_m, 4 * n));  // practical default
  };

  std::vector<ControlSignal> pieces;
  SpectralState y = y0;
  double t = 0.0;
  res.trajectory.emplace_back(0.0, res.y0_norm);

  // Free evolution psi on [0, t1 - delta].
  if (pts[0] > 0.0) {
    pieces.push_back(zero_piece(big_m, 0.0, pts[0]));
    y = free_evolve(basis, y, pts[0]);
    t = pts[0];
    res.trajectory.emplace_back(t, y.norm());
  }
  const double ytilde_norm = y.norm();
  const double log_ytilde2 = 2.0 * std::log(std::max(ytilde_norm, 1e-300));

  double sum_log_alpha = 0.0;
  std::vector<double> rs_used;
  for (int n = 1; n <= opt.max_stages; ++n) {
    if (static_cast<std::size_t>(2 * n + 1) > pts.size()) break;
    const double ta = pts[static_cast<std::size_t>(2 * n - 2)];
    const double tb = pts[static_cast<std::size_t>(2 * n - 1)];
    const double tc = pts[static_cast<std::size_t>(2 * n)];
    const double r = pick_r(n);
    rs_used.push_back(r);

    StageResult st;
    st.stage = n;
    st.r = r;
    st.t_start = ta;
    st.t_mid = tb;
    st.t_end = tc;
    st.state_norm_in = y.norm();

    auto frc = finite_rank_control(basis, y, r, ta, tb, ed, g,
                                   opt.grid_steps_per_stage);
    pieces.push_back(frc.control);
    y = frc.state_end;
    t = tb;
    st.residual = frc.residual;
    st.sup_norm = frc.sup_norm;
    st.state_norm_mid = y.norm();
    res.trajectory.emplace_back(t, st.state_norm_mid);

    // Free evolution on J_N, with the spectral-gap decay estimate.
    pieces.push_back(zero_piece(big_m, tb, tc));
    SpectralState y_next = free_evolve(basis, y, tc - tb);
    st.state_norm_out = y_next.norm();
    st.free_decay_bound =
        std::exp(-2.0 * r * (tc - tb)) * st.state_norm_mid * st.state_norm_mid;
    st.free_decay_ok = st.state_norm_out * st.state_norm_out <=
                       st.free_decay_bound * (1.0 + 1e-10) + 1e-300;
    y = y_next;
    t = tc;
    res.trajectory.emplace_back(t, st.state_norm_out);

    if (opt.ledger != nullptr) {
      const auto& led = *opt.ledger;
      double log_alpha_n;
      if (opt.literal_schedule) {
        log_alpha_n = led.log_alpha[static_cast<std::size_t>(n - 1)];
      } else {
        log_alpha_n = led.c2 * std::sqrt(r);
        if (n >= 2)
          log_alpha_n -= 2.0 * rs_used[static_cast<std::size_t>(n - 2)] *
                         led.t3_minus_t2 * std::pow(led.c0, -2.0 * (n - 2));
      }
      sum_log_alpha += log_alpha_n;
      st.log_control_bound =
          n * (n - 1.0) * std::log(led.c_tilde) + sum_log_alpha + log_ytilde2;
      st.log_state_bound = led.log_l + log_ytilde2;
      st.bounds_available = true;
    }

    res.stages.push_back(st);
    res.stages_run = n;
    if (y.norm() <= opt.stop_tol * res.y0_norm) {
      res.converged = true;
      break;
    }
  }

  if (t < horizon) {
    pieces.push_back(zero_piece(big_m, t, horizon));
    y = free_evolve(basis, y, horizon - t);
    t = horizon;
  }
  res.trajectory.emplace_back(horizon, y.norm());

  ControlSignal assembled = pieces.front();
  for (std::size_t i = 1; i < pieces.size(); ++i)
    assembled = concat_controls(assembled, pieces[i]);
  res.control = std::move(assembled);
  res.final_state = y;
  res.final_norm = y.norm();
  if (!res.converged && res.final_norm <= opt.stop_tol * res.y0_norm)
    res.converged = true;

  for (const auto& st : res.stages)
    res.final_projections.push_back(project(basis, res.final_state, st.r).norm());
  return res;
}

}  // namespace heatctl
