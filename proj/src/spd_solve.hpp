#pragma once

#include <Eigen/Dense>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace heatctl::detail {

struct SpdSolve {
  Eigen::VectorXd x;
  double jitter = 0.0;
  double rel_residual = 0.0;
  double condition = 0.0;
};

// LDLT with escalating diagonal jitter (1e-14 .. 1e-8 of the trace) and fixed
// iterative refinement against the unperturbed matrix.
inline SpdSolve solve_spd_with_jitter(const Eigen::MatrixXd& a,
                                      const Eigen::VectorXd& rhs,
                                      const char* who = "solve_spd_with_jitter") {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  SpdSolve out;
  const int m = static_cast<int>(a.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  out.condition = es.eigenvalues().maxCoeff() /
                  std::max(es.eigenvalues().minCoeff(), 1e-300);

  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.x = Eigen::VectorXd::Zero(m);
    return out;
  }
  // Symmetric diagonal (Jacobi) scaling: the diagonal carries most of the
  // exponential grading of these Gramians, so the scaled system is far better
  // conditioned than the raw one.
  Eigen::VectorXd d = a.diagonal().cwiseMax(1e-300).cwiseSqrt();
  Eigen::VectorXd dinv = d.cwiseInverse();
  Eigen::MatrixXd as = dinv.asDiagonal() * a * dinv.asDiagonal();
  Eigen::VectorXd rs = dinv.asDiagonal() * rhs;

  const double trace = as.trace();
  double best_res = kInf;
  Eigen::VectorXd best_x = Eigen::VectorXd::Zero(m);
  for (double scale : {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
    double jitter = scale * trace;
    Eigen::MatrixXd aj = as;
    if (jitter > 0.0) aj.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(aj);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd z = ldlt.solve(rs);
    // refine against the unscaled system, where the residual is judged
    Eigen::VectorXd x = dinv.asDiagonal() * z;
    double rel = (rhs - a * x).norm() / rhs_norm;
    for (int it = 0; it < 30 && rel > 1e-13; ++it) {
      z += ldlt.solve(rs - as * z);
      Eigen::VectorXd x_new = dinv.asDiagonal() * z;
      double rel_new = (rhs - a * x_new).norm() / rhs_norm;
      if (rel_new >= rel) break;
      x = x_new;
      rel = rel_new;
    }
    if (rel < best_res) {
      best_res = rel;
      best_x = x;
      out.jitter = jitter;
    }
    if (rel <= 1e-12) break;
  }
  // Beyond roughly condition 1e13 the factorization cannot reach a small
  // residual in double precision. Fall back to a truncated eigen
  // pseudo-inverse: it solves the resolvable subspace and leaves the rest,
  // and callers judge the end result by re-simulation.
  if (best_res > 1e-6) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(a);
    const double cutoff = 1e-14 * full.eigenvalues().maxCoeff();
    Eigen::VectorXd c = full.eigenvectors().transpose() * rhs;
    for (int i = 0; i < m; ++i)
      c[i] = full.eigenvalues()(i) > cutoff ? c[i] / full.eigenvalues()(i) : 0.0;
    Eigen::VectorXd x = full.eigenvectors() * c;
    double rel = (rhs - a * x).norm() / rhs_norm;
    if (rel < best_res) {
      best_res = rel;
      best_x = x;
      out.jitter = 0.0;
    }
  }
  out.x = best_x;
  out.rel_residual = best_res;
  return out;
}

}  // namespace heatctl::detail
