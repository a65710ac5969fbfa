// Timing comparison of the serial reference kernels against the OpenMP
// variants, plus a bitwise equality check on every output.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "heatctl/kernels.hpp"
#include "heatctl/spectral.hpp"

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, seconds(t0, t1));
  }
  return best;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

int main() {
  using namespace heatctl;
  const int m = 256;
  const int k = 512;
  const int points = 4096;
  const int reps = 5;
  EigenBasis basis = build_basis(m);

  Eigen::MatrixXd g_serial, g_parallel;
  double t_gram_s = time_best_of(reps, [&] {
    kernels::assemble_omega_gramian_serial(basis, 0.3, 0.8, g_serial);
  });
  double t_gram_p = time_best_of(reps, [&] {
    kernels::assemble_omega_gramian_parallel(basis, 0.3, 0.8, g_parallel);
  });
  bool gram_eq = bitwise_equal(g_serial, g_parallel);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  Eigen::MatrixXd w(m, k);
  Eigen::VectorXd measure(k);
  for (int j = 0; j < k; ++j) {
    measure[j] = unif(rng);
    for (int i = 0; i < m; ++i) w(i, j) = unif(rng);
  }
  Eigen::MatrixXd lam_serial, lam_parallel;
  double t_wg_s = time_best_of(reps, [&] {
    kernels::assemble_weighted_gramian_serial(g_serial, w, measure, lam_serial);
  });
  double t_wg_p = time_best_of(reps, [&] {
    kernels::assemble_weighted_gramian_parallel(g_serial, w, measure, lam_parallel);
  });
  bool wg_eq = bitwise_equal(lam_serial, lam_parallel);

  Eigen::VectorXd lambdas(m), terminal(m);
  for (int i = 0; i < m; ++i) {
    lambdas[i] = basis.lambda(i + 1);
    terminal[i] = unif(rng);
  }
  std::vector<double> times(points);
  for (int p = 0; p < points; ++p)
    times[static_cast<std::size_t>(p)] = p / static_cast<double>(points);
  std::vector<double> curve_serial, curve_parallel;
  double t_curve_s = time_best_of(reps, [&] {
    kernels::omega_norm_curve_serial(g_serial, lambdas, terminal, 1.0, times,
                                     curve_serial);
  });
  double t_curve_p = time_best_of(reps, [&] {
    kernels::omega_norm_curve_parallel(g_serial, lambdas, terminal, 1.0, times,
                                       curve_parallel);
  });
  bool curve_eq =
      curve_serial.size() == curve_parallel.size() &&
      std::memcmp(curve_serial.data(), curve_parallel.data(),
                  sizeof(double) * curve_serial.size()) == 0;

  std::printf("kernel                  serial [s]  parallel [s]  speedup  bitwise\n");
  std::printf("omega_gramian  %20.6f %13.6f %8.2fx  %s\n", t_gram_s, t_gram_p,
              t_gram_s / t_gram_p, gram_eq ? "equal" : "DIFFER");
  std::printf("weighted_gramian %18.6f %13.6f %8.2fx  %s\n", t_wg_s, t_wg_p,
              t_wg_s / t_wg_p, wg_eq ? "equal" : "DIFFER");
  std::printf("omega_norm_curve %18.6f %13.6f %8.2fx  %s\n", t_curve_s, t_curve_p,
              t_curve_s / t_curve_p, curve_eq ? "equal" : "DIFFER");
  return gram_eq && wg_eq && curve_eq ? 0 : 1;
}
