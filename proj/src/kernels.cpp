#include "heatctl/kernels.hpp"

#include <cmath>

#include "heatctl/spectral.hpp"

namespace heatctl::kernels {

namespace {

Backend g_backend = Backend::Parallel;

// Antiderivative of X_i X_j on (0, L) with X_i = sqrt(2/L) sin(i pi x / L).
double cross_primitive(int i, int j, double x, double len) {
  const double pi = std::acos(-1.0);
  if (i == j) {
    // (2/L) int sin^2(i pi x / L) = x/L - sin(2 i pi x / L) / (2 i pi)
    return x / len - std::sin(2.0 * i * pi * x / len) / (2.0 * i * pi);
  }
  // (2/L) int sin(i..) sin(j..) = sin((i-j) pi x/L)/((i-j) pi) - sin((i+j) pi x/L)/((i+j) pi)
  return std::sin((i - j) * pi * x / len) / ((i - j) * pi) -
         std::sin((i + j) * pi * x / len) / ((i + j) * pi);
}

double gramian_entry(int i, int j, double alpha, double beta, double len) {
  return cross_primitive(i, j, beta, len) - cross_primitive(i, j, alpha, len);
}

}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

void assemble_omega_gramian_serial(const EigenBasis& basis, double alpha,
                                   double beta, Eigen::MatrixXd& out) {
  const int m = basis.mode_count();
  out.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double v = gramian_entry(i + 1, j + 1, alpha, beta, basis.length());
      out(i, j) = v;
      out(j, i) = v;
    }
}

void assemble_omega_gramian_parallel(const EigenBasis& basis, double alpha,
                                     double beta, Eigen::MatrixXd& out) {
  const int m = basis.mode_count();
  out.resize(m, m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double v = gramian_entry(i + 1, j + 1, alpha, beta, basis.length());
      out(i, j) = v;
      out(j, i) = v;
    }
}

void assemble_omega_gramian(const EigenBasis& basis, double alpha, double beta,
                            Eigen::MatrixXd& out) {
  if (g_backend == Backend::Parallel)
    assemble_omega_gramian_parallel(basis, alpha, beta, out);
  else
    assemble_omega_gramian_serial(basis, alpha, beta, out);
}

namespace {
inline double weighted_entry(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w,
                             const Eigen::VectorXd& m, int i, int j) {
  double s = 0.0;
  for (int k = 0; k < w.cols(); ++k)
    if (m(k) > 0.0) s += w(i, k) * w(j, k) / m(k);
  return g(i, j) * s;
}
}  // namespace

void assemble_weighted_gramian_serial(const Eigen::MatrixXd& g,
                                      const Eigen::MatrixXd& w,
                                      const Eigen::VectorXd& step_measure,
                                      Eigen::MatrixXd& out) {
  const int m = static_cast<int>(w.rows());
  out.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double v = weighted_entry(g, w, step_measure, i, j);
      out(i, j) = v;
      out(j, i) = v;
    }
}

void assemble_weighted_gramian_parallel(const Eigen::MatrixXd& g,
                                        const Eigen::MatrixXd& w,
                                        const Eigen::VectorXd& step_measure,
                                        Eigen::MatrixXd& out) {
  const int m = static_cast<int>(w.rows());
  out.resize(m, m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double v = weighted_entry(g, w, step_measure, i, j);
      out(i, j) = v;
      out(j, i) = v;
    }
}

void assemble_weighted_gramian(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w,
                               const Eigen::VectorXd& step_measure,
                               Eigen::MatrixXd& out) {
  if (g_backend == Backend::Parallel)
    assemble_weighted_gramian_parallel(g, w, step_measure, out);
  else
    assemble_weighted_gramian_serial(g, w, step_measure, out);
}

namespace {
inline double curve_value(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambdas,
                          const Eigen::VectorXd& terminal, double big_t, double t) {
  const int m = static_cast<int>(terminal.size());
  Eigen::VectorXd q(m);
  for (int i = 0; i < m; ++i) q(i) = terminal(i) * std::exp(-lambdas(i) * (big_t - t));
  double v = q.dot(g * q);
  return v > 0.0 ? std::sqrt(v) : 0.0;
}
}  // namespace

void omega_norm_curve_serial(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambdas,
                             const Eigen::VectorXd& terminal, double big_t,
                             const std::vector<double>& times,
                             std::vector<double>& values) {
  values.resize(times.size());
  for (std::size_t p = 0; p < times.size(); ++p)
    values[p] = curve_value(g, lambdas, terminal, big_t, times[p]);
}

void omega_norm_curve_parallel(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambdas,
                               const Eigen::VectorXd& terminal, double big_t,
                               const std::vector<double>& times,
                               std::vector<double>& values) {
  values.resize(times.size());
  const auto n = static_cast<long long>(times.size());
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < n; ++p)
    values[static_cast<std::size_t>(p)] =
        curve_value(g, lambdas, terminal, big_t, times[static_cast<std::size_t>(p)]);
}

void omega_norm_curve(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambdas,
                      const Eigen::VectorXd& terminal, double big_t,
                      const std::vector<double>& times, std::vector<double>& values) {
  if (g_backend == Backend::Parallel)
    omega_norm_curve_parallel(g, lambdas, terminal, big_t, times, values);
  else
    omega_norm_curve_serial(g, lambdas, terminal, big_t, times, values);
}

}  // namespace heatctl::kernels
