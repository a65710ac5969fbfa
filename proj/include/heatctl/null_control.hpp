#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "heatctl/spectral.hpp"
#include "heatctl/time_sets.hpp"

namespace heatctl {

// Every scalar of the iterative construction. Products along the stage index
// explode quickly, so each derived quantity is carried in the log domain; the
// plain value is exp() of it and may overflow to inf.
struct ConstantsLedger {
  double c1 = 1.0;
  double c2 = 0.0;
  double rho = 1.0;
  double c0 = 1.0;
  double t2_minus_t1 = 0.0;
  double t3_minus_t2 = 0.0;
  double c_tilde = 0.0;            // 2 c1 / (rho^2 (t2-t1)^2) * c0^2
  std::vector<double> log_r;       // log r_N = 4 (log A + (N-1) log c_tilde)
  std::vector<double> log_alpha;   // stage amplification factors
  int n0 = 0;                      // max(N1, N2)
  int n1 = 0;
  int n2 = 0;
  double log_l = 0.0;              // log of the accumulated amplification bound
  double delta0 = 0.0;             // = t1

  double r(int n) const;           // 1-based; may be inf
  double alpha(int n) const;
  double big_l() const;
};

// Literal evaluation of the stage recursion on the density sequence gaps.
// c1 < 1 is clamped up to 1 (recorded in clamped_c1 flag of the result via
// ledger.c1). The N0 search is capped at 64 stages.
ConstantsLedger schedule_constants(double c1, double c2, const DensitySequence& seq);

struct DeltaInvarianceEntry {
  double delta;
  ConstantsLedger ledger;
  bool equal_to_base;
};

struct DeltaInvarianceReport {
  ConstantsLedger base;
  std::vector<DeltaInvarianceEntry> entries;
  bool all_equal = true;
};

DeltaInvarianceReport delta_invariance_check(const DensitySequence& seq, double c1,
                                             double c2,
                                             const std::vector<double>& deltas);

struct FiniteRankResult {
  ControlSignal control;           // supported on E within [a, b]
  SpectralState adjoint_terminal;  // phi_T, zero above r
  SpectralState state_end;         // y(b) from evolve_controlled
  double residual = 0.0;           // ||P_r y(b)||
  double sup_norm = 0.0;
  double condition_estimate = 0.0;
  double jitter_used = 0.0;
};

// Gramian least-norm control annihilating the modes with lambda_i <= r at
// time b. The control is the E-averaged adjoint solution per grid step:
//   u_k,j = phi_T,j * (int_{E cap step k} e^{-lambda_j (b-s)} ds) / m(E cap step k)
// which keeps the Gramian Lambda_ij = G_ij sum_k w_ik w_jk / m_k symmetric
// positive semidefinite and makes the annihilation exact in the
// piecewise-constant class (up to the linear solve). As the grid refines,
// Lambda converges to G_ij * int_{E cap [a,b]} e^{-(lambda_i+lambda_j)(b-s)} ds.
FiniteRankResult finite_rank_control(const EigenBasis& basis,
                                     const SpectralState& y_init, double r,
                                     double a, double b, const TimeSet& e,
                                     const OmegaGramian& g, int grid_steps = 64);

// Continuous-limit Gramian over modes with lambda_i <= r (used by tests and
// by the observability module).
Eigen::MatrixXd control_gramian(const EigenBasis& basis, const TimeSet& e,
                                double a, double b, const OmegaGramian& g,
                                int mode_limit);

struct StageResult {
  int stage = 0;
  double r = 0.0;
  double t_start = 0.0, t_mid = 0.0, t_end = 0.0;  // I_N = [t_start, t_mid], J_N to t_end
  double residual = 0.0;                           // ||P_r y(t_mid)||
  double sup_norm = 0.0;
  double state_norm_in = 0.0;
  double state_norm_mid = 0.0;
  double state_norm_out = 0.0;
  double free_decay_bound = 0.0;  // exp(-2 r (t_end - t_mid)) ||y(t_mid)||^2
  bool free_decay_ok = true;
  double log_control_bound = 0.0; // log of the per-stage control-norm bound
  double log_state_bound = 0.0;   // log of the accumulated state bound
  bool bounds_available = false;
};

struct AssemblerOptions {
  double stop_tol = 1e-8;          // relative to ||y0||
  int max_stages = 8;
  int grid_steps_per_stage = 64;
  std::vector<double> r_schedule;  // explicit override; empty = default
  bool literal_schedule = false;   // take r_N from the ledger
  const ConstantsLedger* ledger = nullptr;  // enables bound reports
};

struct NullControlResult {
  ControlSignal control;       // over [0, T - delta]
  SpectralState final_state;   // at T - delta
  double y0_norm = 0.0;
  double final_norm = 0.0;
  bool converged = false;
  int stages_run = 0;
  std::vector<StageResult> stages;
  std::vector<std::pair<double, double>> trajectory;  // (t, ||y||)
  std::vector<double> final_projections;              // ||P_{r_N} y(T-delta)||
};

// Iterative assembler: free evolution on [0, t1-delta], then alternate
// finite-rank annihilation on I_N with free evolution on J_N, zero control on
// the tail. The reported states come from evolve_controlled itself, so an
// independent re-simulation of the assembled control reproduces them exactly.
NullControlResult iterative_null_control(const EigenBasis& basis,
                                         const SpectralState& y0, const TimeSet& e,
                                         double big_t, double delta,
                                         const DensitySequence& seq,
                                         const OmegaGramian& g,
                                         const AssemblerOptions& opt = {});

}  // namespace heatctl
