#include "heatctl/observability.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "heatctl/kernels.hpp"
#include "heatctl/null_control.hpp"
#include "spd_solve.hpp"

namespace heatctl {

SpectralIneqConstant spectral_ineq_constant(const EigenBasis& basis,
                                            const OmegaGramian& g, double r) {
  const int m = basis.modes_below(r);
  if (m == 0)
    throw std::invalid_argument("spectral_ineq_constant: no modes with lambda_i <= r");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix.topLeftCorner(m, m));
  SpectralIneqConstant out;
  out.modes = m;
  double emin = es.eigenvalues()(0);
  if (!(emin > 0.0))
    throw std::runtime_error("spectral_ineq_constant: restricted Gramian not positive");
  out.value = 1.0 / emin;
  out.witness = es.eigenvectors().col(0);
  return out;
}

SpectralIneqFit fit_lebeau_zuazua(const EigenBasis& basis, const OmegaGramian& g,
                                  const std::vector<double>& r_grid) {
  if (r_grid.size() < 4)
    throw std::invalid_argument("fit_lebeau_zuazua: need >= 4 grid points");
  double rmin = r_grid.front(), rmax = r_grid.front();
  for (double r : r_grid) {
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  if (!(rmax >= 4.0 * rmin))
    throw std::invalid_argument("fit_lebeau_zuazua: grid must span a factor of 4 in r");

  SpectralIneqFit fit;
  fit.r_grid = r_grid;
  const auto n = static_cast<int>(r_grid.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double c = spectral_ineq_constant(basis, g, r_grid[static_cast<std::size_t>(i)]).value;
    fit.constants.push_back(c);
    a(i, 0) = 1.0;
    a(i, 1) = std::sqrt(r_grid[static_cast<std::size_t>(i)]);
    y(i) = std::log(c);
  }
  Eigen::Vector2d coef = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  fit.c1_hat_raw = std::exp(coef(0));
  fit.c1_hat = std::max(fit.c1_hat_raw, 1.0);
  fit.c2_hat = coef(1);
  fit.fit_residual = std::sqrt((a * coef - y).squaredNorm() / n);
  return fit;
}

QuadraticObservability observability_constant_quadratic(const EigenBasis& basis,
                                                        const TimeSet& e,
                                                        const OmegaGramian& g,
                                                        double big_t, int modes) {
  if (e.measure() <= 0.0)
    throw std::invalid_argument("observability_constant_quadratic: m(E) = 0");
  const int m = std::min(modes, basis.mode_count());
  Eigen::MatrixXd lam = control_gramian(basis, e, 0.0, big_t, g, m);
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) d(i) = std::exp(-2.0 * basis.lambda(i + 1) * big_t);

  // Largest mu of diag(d) p = mu Lambda p via power iteration with Lambda solves.
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  {
    double trace = lam.trace();
    for (double scale : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
      Eigen::MatrixXd aj = lam;
      if (scale > 0.0) aj.diagonal().array() += scale * trace;
      ldlt.compute(aj);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
    }
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error(
          "observability_constant_quadratic: Lambda_E singular after jitter");
  }

  QuadraticObservability out;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(double(m)));
  double mu = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd q = ldlt.solve(d.asDiagonal() * p);
    q.normalize();
    Eigen::VectorXd dq = d.asDiagonal() * q;
    Eigen::VectorXd lq = lam * q;
    mu = q.dot(dq) / q.dot(lq);
    out.iterations = it + 1;
    double res = (dq - mu * lq).norm();
    p = q;
    if (res <= 1e-8 * mu * lq.norm()) {
      out.residual = res / (mu * lq.norm());
      break;
    }
    out.residual = res / (mu * lq.norm());
  }
  out.value = mu;
  out.witness = p;
  return out;
}

namespace {

// Simpson nodes/weights over each component of E clipped to [0, T].
void build_panels(const TimeSet& e, double big_t, int panels_per_component,
                  std::vector<double>& times, std::vector<double>& weights) {
  times.clear();
  weights.clear();
  for (const auto& iv : e.clipped(0.0, big_t)) {
    const int np = panels_per_component;
    const double h = iv.length() / (2 * np);
    for (int j = 0; j <= 2 * np; ++j) {
      times.push_back(iv.lo + j * h);
      double w = (j == 0 || j == 2 * np) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      weights.push_back(w * h / 3.0);
    }
  }
}

}  // namespace

double l1_observability_ratio(const EigenBasis& basis, const TimeSet& e,
                              const OmegaGramian& g, double big_t,
                              const Eigen::VectorXd& terminal,
                              int panels_per_component) {
  const int m = static_cast<int>(terminal.size());
  Eigen::VectorXd lambdas(m);
  for (int i = 0; i < m; ++i) lambdas(i) = basis.lambda(i + 1);
  std::vector<double> times, weights, values;
  build_panels(e, big_t, panels_per_component, times, weights);
  kernels::omega_norm_curve(g.matrix.topLeftCorner(m, m), lambdas, terminal, big_t,
                            times, values);
  double denom = 0.0;
  for (std::size_t p = 0; p < times.size(); ++p) denom += weights[p] * values[p];
  double num = 0.0;
  for (int i = 0; i < m; ++i) {
    double v = terminal(i) * std::exp(-lambdas(i) * big_t);
    num += v * v;
  }
  return std::sqrt(num) / denom;
}

L1Observability observability_constant_l1(const EigenBasis& basis, const TimeSet& e,
                                          const OmegaGramian& g, double big_t,
                                          const L1ObservabilityOptions& opt) {
  if (e.measure() <= 0.0)
    throw std::invalid_argument("observability_constant_l1: m(E) = 0");
  const int m = std::min(opt.modes, basis.mode_count());
  Eigen::VectorXd lambdas(m);
  for (int i = 0; i < m; ++i) lambdas(i) = basis.lambda(i + 1);
  const Eigen::MatrixXd gm = g.matrix.topLeftCorner(m, m);

  std::vector<double> times, weights;
  build_panels(e, big_t, opt.panels_per_component, times, weights);

  auto objective_and_grad = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    std::vector<double> values;
    kernels::omega_norm_curve(gm, lambdas, p, big_t, times, values);
    double denom = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) denom += weights[k] * values[k];
    Eigen::VectorXd d0 = (-lambdas * big_t).array().exp();
    Eigen::VectorXd num_vec = d0.cwiseProduct(p);
    double num = num_vec.norm();
    double j = num / denom;
    if (grad != nullptr) {
      Eigen::VectorXd gnum = d0.cwiseProduct(d0).cwiseProduct(p) / std::max(num, 1e-300);
      Eigen::VectorXd gden = Eigen::VectorXd::Zero(m);
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (values[k] <= 1e-300) continue;
        Eigen::VectorXd dt = (-lambdas * (big_t - times[k])).array().exp();
        Eigen::VectorXd q = dt.cwiseProduct(p);
        gden += weights[k] * dt.cwiseProduct(gm * q) / values[k];
      }
      *grad = (gnum * denom - num * gden) / (denom * denom);
    }
    return j;
  };

  auto ascend = [&](Eigen::VectorXd p) {
    p.normalize();
    Eigen::VectorXd grad(m);
    double j = objective_and_grad(p, &grad);
    int it = 0;
    bool stagnated = false;
    for (; it < opt.max_iterations; ++it) {
      Eigen::VectorXd tangent = grad - grad.dot(p) * p;
      double gnorm = tangent.norm();
      if (gnorm <= opt.step_tol * std::max(j, 1e-300)) break;
      double step = 1.0 / std::max(gnorm, 1e-300);
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Eigen::VectorXd cand = (p + step * tangent).normalized();
        double jc = objective_and_grad(cand, nullptr);
        if (jc > j) {
          p = cand;
          j = objective_and_grad(p, &grad);
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) {
        stagnated = true;
        break;
      }
    }
    return std::tuple<double, Eigen::VectorXd, int, bool>(j, p, it, stagnated);
  };

  L1Observability best;
  best.lower_bound = -1.0;

  // Quadratic maximizer witness seeds the first start, so the returned bound
  // dominates the value at that witness.
  auto quad = observability_constant_quadratic(basis, e, g, big_t, m);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(quad.witness);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 1; s < opt.starts; ++s) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v(i) = gauss(rng);
    starts.push_back(v.normalized());
  }

  for (auto& s : starts) {
    auto [j, p, iters, stag] = ascend(s);
    if (j > best.lower_bound) {
      best.lower_bound = j;
      best.witness = p;
      best.stagnated = stag;
    }
    best.iterations += iters;
  }
  return best;
}

}  // namespace heatctl
