#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "heatctl/null_control.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/time_sets.hpp"

namespace heatctl {

struct TargetSet {
  enum class Kind { PointZero, Ball };
  Kind kind = Kind::PointZero;
  SpectralState center;   // ignored for PointZero (origin)
  double radius = 0.0;

  static TargetSet point_zero(int modes);
  static TargetSet ball(SpectralState center, double radius);

  // max(0, ||y - center|| - radius); distance to the set.
  double distance(const SpectralState& y) const;
};

// Closed ball B(v0, R) in L^2(Omega), applied per time step.
struct ControlConstraint {
  SpectralState center;  // v0
  double radius = 0.0;   // R > 0 (0 allowed: the singleton {v0})

  static ControlConstraint ball(int modes, double radius);
};

struct ReachOptions {
  int max_iterations = 5000;
  double grad_tol = 1e-9;        // relative gradient-mapping stop
  std::uint64_t seed = 0;
  bool random_init = false;
  bool polish = true;            // replace with the min-norm feasible control
  int polish_iterations = 4000;
};

struct ReachResult {
  bool feasible = false;
  ControlSignal control;
  double residual = 0.0;       // distance of y(T) to the target
  double objective = 0.0;      // 1/2 residual^2
  double grad_mapping_norm = 0.0;
  int iterations = 0;
  bool polished = false;
};

// Convex projected-gradient solve: minimize the squared target distance of
// y(T) over piecewise-constant controls with the per-step ball constraint.
// When feasible and opt.polish is set, the returned control is the
// minimum-norm feasible control (computed by a deterministic dual ascent),
// which is independent of the initialization seed.
ReachResult reach_feasible(const EigenBasis& basis, double big_t,
                           const ControlConstraint& bound, const SpectralState& y0,
                           const TargetSet& target, const TimeSet& e,
                           const OmegaGramian& g, int steps, double tol,
                           const ReachOptions& opt = {});

// N(T) = inf { R : target reachable at time T with per-step bound R }.
// Bisection over R with reach_feasible as the oracle, to relative 1e-4.
double min_sup_norm(const EigenBasis& basis, double big_t, const SpectralState& y0,
                    const TargetSet& target, const TimeSet& e, const OmegaGramian& g,
                    int steps, double tol, double rel_tol = 1e-4);

struct BangBangReport {
  double fraction_full = 0.0;        // |  ||u_k - v0||        - R | <= band R
  double fraction_restricted = 0.0;  // |  ||chi_omega u_k||_G - R | <= band R
  std::vector<bool> flags;
};

BangBangReport bang_bang_report(const ControlSignal& u, const ControlConstraint& bound,
                                double band, const OmegaGramian* g = nullptr);

struct OptimalResult {
  bool admissible = false;
  double t_star = 0.0;
  ControlSignal control;            // over [0, t_star]
  std::vector<double> step_norms;   // ||u_k - v0||
  double bang_bang_fraction = 0.0;
  double residual = 0.0;            // distance of y(T*) to the target
  double necessary_bound = 0.0;     // (1 + 1/lambda1)(||y0|| + 1) + R
  double target_center_norm = 0.0;
  int bisection_iterations = 0;
  std::string failure_reason;
};

struct OptimalTimeOptions {
  double tol_t = -1.0;           // < 0: use 1e-4 * bracket top
  double reach_tol = 1e-6;       // target distance tolerance
  double bracket_start = 1.0;
  double bracket_cap = 64.0;     // geometric growth cap on T
  ReachOptions reach;
};

// Bisection on T for the root of N(T) = R; T* is the feasible upper endpoint
// of the final bracket. E is given on [0, horizon]; the search never exceeds
// min(horizon, bracket_cap).
OptimalResult optimal_time(const EigenBasis& basis, const SpectralState& y0,
                           const TargetSet& target, const ControlConstraint& bound,
                           const TimeSet& e, const OmegaGramian& g, int steps,
                           const OptimalTimeOptions& opt = {});

struct ImproveOptions {
  double reconstruction_tol = 1e-8;
  int grid_steps_per_stage = 64;
  int max_stages = 8;
  double delta_floor_fraction = 1e-6;  // times T
};

struct ImproveResult {
  bool ok = false;
  double delta = 0.0;
  ControlSignal v_delta;          // over [0, T - delta]
  double reconstruction_error = 0.0;
  double added_control_sup = 0.0;  // sup_t ||u_delta(t)||, must be <= eps/2
  double sup_norm = 0.0;           // sup_t ||v_delta(t) - v0||
  std::string failure_reason;
};

// The improvement construction behind the bang-bang principle: given an
// admissible control with interior slack eps on E_slack, produce delta > 0 and
// v_delta with y(T - delta; v_delta, y0) = y(T; u_star, y0). The correction
// u_delta is a null control for -h_delta, h_delta = int_0^delta
// G(delta-sigma) chi_omega u*(sigma) dsigma + (G(delta)-I) y0, and its sup
// norm cap eps/2 is enforced by verify-and-shrink on delta.
ImproveResult improve_control(const EigenBasis& basis, const ControlSignal& u_star,
                              double big_t, const SpectralState& y0,
                              const ControlConstraint& bound, const TimeSet& e_slack,
                              double eps, const ConstantsLedger& ledger,
                              const DensitySequence& seq, const OmegaGramian& g,
                              const ImproveOptions& opt = {});

// h_delta of the construction, in closed form (exposed for tests).
SpectralState improvement_shift_state(const EigenBasis& basis,
                                      const ControlSignal& u_star,
                                      const SpectralState& y0,
                                      const OmegaGramian& g, double delta);

struct MidpointReport {
  bool grids_match = false;
  double max_identity_error = 0.0;   // parallelogram identity on boundary steps
  double max_interior_slack = 0.0;   // max over steps of R - ||w - v0||
  double differing_fraction = 0.0;   // fraction of steps with u1 != u2
  double relative_difference = 0.0;  // ||u1 - u2|| / max norm
};

MidpointReport midpoint_uniqueness_check(const ControlSignal& u1,
                                         const ControlSignal& u2,
                                         const ControlConstraint& bound,
                                         double boundary_band = 1e-2);

}  // namespace heatctl
