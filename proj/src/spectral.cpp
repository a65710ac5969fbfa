#include "heatctl/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "heatctl/kernels.hpp"

namespace heatctl {

EigenBasis::EigenBasis(int mode_count, double length)
    : m_(mode_count), length_(length) {
  if (mode_count < 1) throw std::invalid_argument("EigenBasis: mode_count < 1");
  if (!(length > 0.0)) throw std::invalid_argument("EigenBasis: nonpositive length");
  const double pi = std::acos(-1.0);
  eigenvalues_.resize(static_cast<std::size_t>(mode_count));
  for (int i = 1; i <= mode_count; ++i) {
    double k = i * pi / length;
    eigenvalues_[static_cast<std::size_t>(i - 1)] = k * k;
  }
}

double EigenBasis::eigenfunction(int i, double x) const {
  const double pi = std::acos(-1.0);
  return std::sqrt(2.0 / length_) * std::sin(i * pi * x / length_);
}

int EigenBasis::modes_below(double r) const {
  int n = 0;
  while (n < m_ && eigenvalues_[static_cast<std::size_t>(n)] <= r) ++n;
  return n;
}

EigenBasis build_basis(int mode_count, double length) {
  return EigenBasis(mode_count, length);
}

OmegaGramian omega_gramian(const EigenBasis& basis, double alpha, double beta) {
  if (!(alpha >= 0.0 && beta <= basis.length() && beta > alpha))
    throw std::invalid_argument("omega_gramian: omega not a subinterval of (0, length)");
  OmegaGramian g;
  g.alpha = alpha;
  g.beta = beta;
  kernels::assemble_omega_gramian(basis, alpha, beta, g.matrix);
  return g;
}

SpectralState free_evolve(const EigenBasis& basis, const SpectralState& s, double t) {
  if (t < 0.0) throw std::invalid_argument("free_evolve: t < 0");
  if (s.modes() != basis.mode_count())
    throw std::invalid_argument("free_evolve: state/basis mode mismatch");
  SpectralState out = s;
  for (int i = 0; i < s.modes(); ++i) out.coeffs(i) *= std::exp(-basis.lambda(i + 1) * t);
  return out;
}

SpectralState adjoint_solve(const EigenBasis& basis, const SpectralState& terminal,
                            double big_t, double t) {
  if (t < 0.0 || t > big_t)
    throw std::invalid_argument("adjoint_solve: t outside [0, T]");
  return free_evolve(basis, terminal, big_t - t);
}

SpectralState project(const EigenBasis& basis, const SpectralState& s, double r) {
  SpectralState out = s;
  for (int i = 0; i < s.modes(); ++i)
    if (basis.lambda(i + 1) > r) out.coeffs(i) = 0.0;
  return out;
}

ControlSignal ControlSignal::zero(int modes, double a, double b, const TimeSet& support) {
  ControlSignal u;
  u.time_grid = {a, b};
  u.coefficients = Eigen::MatrixXd::Zero(1, modes);
  u.support = support;
  return u;
}

double ControlSignal::restricted_step_norm(int k, const OmegaGramian& g) const {
  Eigen::VectorXd row = coefficients.row(k).transpose();
  double v = row.dot(g.matrix * row);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

double ControlSignal::sup_norm() const {
  double s = 0.0;
  for (int k = 0; k < steps(); ++k) s = std::max(s, step_norm(k));
  return s;
}

SpectralState evolve_controlled(const EigenBasis& basis, const SpectralState& s,
                                const ControlSignal& u, const TimeSet& e,
                                const OmegaGramian& g, double a, double b) {
  if (s.modes() != basis.mode_count())
    throw std::invalid_argument("evolve_controlled: state/basis mode mismatch");
  if (b < a) throw std::invalid_argument("evolve_controlled: window reversed");
  if (u.coefficients.cols() != basis.mode_count())
    throw std::invalid_argument("evolve_controlled: control/basis mode mismatch");
  if (a < u.time_grid.front() - 1e-12 || b > u.time_grid.back() + 1e-12)
    throw std::invalid_argument("evolve_controlled: window outside control grid");

  SpectralState y = s;
  const int m = basis.mode_count();
  for (int k = 0; k < u.steps(); ++k) {
    double s0 = std::max(u.time_grid[static_cast<std::size_t>(k)], a);
    double s1 = std::min(u.time_grid[static_cast<std::size_t>(k) + 1], b);
    if (s1 <= s0) continue;
    Eigen::VectorXd forcing = g.matrix * u.coefficients.row(k).transpose();
    auto pieces = e.clipped(s0, s1);
    for (int i = 0; i < m; ++i) {
      double lam = basis.lambda(i + 1);
      y.coeffs(i) = y.coeffs(i) * std::exp(-lam * (s1 - s0)) +
                    forcing(i) * exp_weight_integral(pieces, s1, lam);
    }
  }
  return y;
}

ControlSignal concat_controls(const ControlSignal& a, const ControlSignal& b) {
  if (std::abs(a.end() - b.start()) > 1e-12)
    throw std::invalid_argument("concat_controls: grids do not abut");
  if (a.coefficients.cols() != b.coefficients.cols())
    throw std::invalid_argument("concat_controls: mode mismatch");
  ControlSignal out;
  out.time_grid = a.time_grid;
  out.time_grid.insert(out.time_grid.end(), b.time_grid.begin() + 1, b.time_grid.end());
  out.coefficients.resize(a.steps() + b.steps(), a.coefficients.cols());
  out.coefficients.topRows(a.steps()) = a.coefficients;
  out.coefficients.bottomRows(b.steps()) = b.coefficients;
  std::vector<Interval> comps = a.support.components();
  for (const auto& iv : b.support.components()) comps.push_back(iv);
  double horizon = std::max(a.support.horizon(), b.support.horizon());
  out.support = TimeSet(comps, horizon);
  return out;
}

}  // namespace heatctl
