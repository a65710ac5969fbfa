#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "heatctl/spectral.hpp"
#include "heatctl/time_sets.hpp"

namespace heatctl {

struct SpectralIneqConstant {
  double value = 1.0;            // C(r) = 1 / lambda_min(G | modes <= r)
  Eigen::VectorXd witness;       // minimizing coefficient vector (unit norm)
  int modes = 0;
};

// Best constant in sum a_i^2 <= C(r) * a' G a over modes with lambda_i <= r.
SpectralIneqConstant spectral_ineq_constant(const EigenBasis& basis,
                                            const OmegaGramian& g, double r);

struct SpectralIneqFit {
  std::vector<double> r_grid;
  std::vector<double> constants;  // C(r) per grid point
  double c1_hat = 1.0;            // clamped to >= 1
  double c1_hat_raw = 1.0;
  double c2_hat = 0.0;
  double fit_residual = 0.0;      // RMS of log C(r) - (log C1 + C2 sqrt(r))
};

// Least-squares fit of log C(r) against sqrt(r).
SpectralIneqFit fit_lebeau_zuazua(const EigenBasis& basis, const OmegaGramian& g,
                                  const std::vector<double>& r_grid);

struct QuadraticObservability {
  double value = 0.0;            // largest mu of D p = mu Lambda_E p
  Eigen::VectorXd witness;       // terminal datum (unit norm)
  int iterations = 0;
  double residual = 0.0;         // ||D p - mu Lambda_E p|| / (mu ||Lambda_E p||)
};

// L2-in-time observability constant over the first `modes` modes:
// sup ||p(0)||^2 / int_E ||chi_omega p||^2 dt, by power iteration with
// Lambda_E solves.
QuadraticObservability observability_constant_quadratic(const EigenBasis& basis,
                                                        const TimeSet& e,
                                                        const OmegaGramian& g,
                                                        double big_t, int modes);

struct L1ObservabilityOptions {
  int modes = 8;
  int panels_per_component = 512;
  int max_iterations = 400;
  int starts = 8;
  std::uint64_t seed = 12345;
  double step_tol = 1e-10;
};

struct L1Observability {
  double lower_bound = 0.0;      // best ||p(0)|| / int_E ||chi_omega p(t)|| dt found
  Eigen::VectorXd witness;       // maximizing terminal datum (unit norm)
  int iterations = 0;
  bool stagnated = false;
};

// Projected gradient ascent on the unit sphere for the L1-in-time
// observability constant; returns a lower bound with its maximizer. The
// quadratic maximizer's witness is always included among the starts.
L1Observability observability_constant_l1(const EigenBasis& basis, const TimeSet& e,
                                          const OmegaGramian& g, double big_t,
                                          const L1ObservabilityOptions& opt = {});

// Objective evaluated at a given terminal datum (used for witness checks).
double l1_observability_ratio(const EigenBasis& basis, const TimeSet& e,
                              const OmegaGramian& g, double big_t,
                              const Eigen::VectorXd& terminal,
                              int panels_per_component = 512);

}  // namespace heatctl
