#pragma once

#include <Eigen/Dense>
#include <vector>

#include "heatctl/time_sets.hpp"

namespace heatctl {

// Dirichlet Laplacian eigenbasis on the interval (0, length):
// lambda_i = (i pi / length)^2, X_i(x) = sqrt(2/length) sin(i pi x / length).
class EigenBasis {
 public:
  EigenBasis(int mode_count, double length = 1.0);

  int mode_count() const { return m_; }
  double length() const { return length_; }
  double lambda(int i) const { return eigenvalues_[static_cast<std::size_t>(i - 1)]; }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double eigenfunction(int i, double x) const;

  // Number of modes with lambda_i <= r.
  int modes_below(double r) const;

 private:
  int m_;
  double length_;
  std::vector<double> eigenvalues_;
};

struct SpectralState {
  Eigen::VectorXd coeffs;

  SpectralState() = default;
  explicit SpectralState(Eigen::VectorXd c) : coeffs(std::move(c)) {}
  static SpectralState zero(int m) { return SpectralState(Eigen::VectorXd::Zero(m)); }

  int modes() const { return static_cast<int>(coeffs.size()); }
  double norm() const { return coeffs.norm(); }  // Parseval
};

// Restriction Gramian G_ij = int_omega X_i X_j dx over omega = (alpha, beta).
struct OmegaGramian {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd matrix;
};

// Piecewise-constant-in-time control in eigen coefficients. Row k holds the
// coefficients of u on [time_grid[k], time_grid[k+1]); the control enters the
// equation multiplied by chi_E chi_omega.
struct ControlSignal {
  std::vector<double> time_grid;   // K+1 breakpoints
  Eigen::MatrixXd coefficients;    // K x M
  TimeSet support;

  int steps() const { return static_cast<int>(coefficients.rows()); }
  double start() const { return time_grid.front(); }
  double end() const { return time_grid.back(); }

  static ControlSignal zero(int modes, double a, double b, const TimeSet& support);

  double step_norm(int k) const { return coefficients.row(k).norm(); }
  double restricted_step_norm(int k, const OmegaGramian& g) const;
  double sup_norm() const;
};

EigenBasis build_basis(int mode_count, double length = 1.0);

OmegaGramian omega_gramian(const EigenBasis& basis, double alpha, double beta);

// a_i -> a_i exp(-lambda_i t)
SpectralState free_evolve(const EigenBasis& basis, const SpectralState& s, double t);

// Backward heat solution value at time t from terminal datum at time T.
SpectralState adjoint_solve(const EigenBasis& basis, const SpectralState& terminal,
                            double big_t, double t);

// Zero out coefficients with lambda_i > r.
SpectralState project(const EigenBasis& basis, const SpectralState& s, double r);

// Exact exponential integrator for y' = -lambda y + chi_E(t) (G u(t)) over
// [a, b]; u piecewise constant, E a union of intervals, so every mode update
// is a closed-form sum of exponential differences.
SpectralState evolve_controlled(const EigenBasis& basis, const SpectralState& s,
                                const ControlSignal& u, const TimeSet& e,
                                const OmegaGramian& g, double a, double b);

// Concatenate controls with abutting grids (end of a == start of b).
ControlSignal concat_controls(const ControlSignal& a, const ControlSignal& b);

}  // namespace heatctl
