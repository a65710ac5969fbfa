#pragma once

#include <Eigen/Dense>
#include <vector>

namespace heatctl {
class EigenBasis;

namespace kernels {

enum class Backend { Serial, Parallel };

// Process-wide backend switch. Parallel variants only distribute independent
// entry/panel writes (no reductions), so both backends produce bit-identical
// results; the serial path is the reference implementation.
Backend backend();
void set_backend(Backend b);

// G_ij = int_alpha^beta X_i X_j dx, closed form.
void assemble_omega_gramian_serial(const EigenBasis& basis, double alpha,
                                   double beta, Eigen::MatrixXd& out);
void assemble_omega_gramian_parallel(const EigenBasis& basis, double alpha,
                                     double beta, Eigen::MatrixXd& out);
void assemble_omega_gramian(const EigenBasis& basis, double alpha, double beta,
                            Eigen::MatrixXd& out);

// Lambda_ij = G_ij * sum_k w_ik w_jk / m_k  (skipping m_k = 0 steps).
// W is m x K of per-step exponential weights, m the per-step measures.
void assemble_weighted_gramian_serial(const Eigen::MatrixXd& g,
                                      const Eigen::MatrixXd& w,
                                      const Eigen::VectorXd& step_measure,
                                      Eigen::MatrixXd& out);
void assemble_weighted_gramian_parallel(const Eigen::MatrixXd& g,
                                        const Eigen::MatrixXd& w,
                                        const Eigen::VectorXd& step_measure,
                                        Eigen::MatrixXd& out);
void assemble_weighted_gramian(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w,
                               const Eigen::VectorXd& step_measure,
                               Eigen::MatrixXd& out);

// values[p] = sqrt(max(0, q(t_p)' G q(t_p))) with q(t)_i = e^{-lambda_i (T - t_p)} p_T,i.
void omega_norm_curve_serial(const Eigen::MatrixXd& g,
                             const Eigen::VectorXd& lambdas,
                             const Eigen::VectorXd& terminal, double big_t,
                             const std::vector<double>& times,
                             std::vector<double>& values);
void omega_norm_curve_parallel(const Eigen::MatrixXd& g,
                               const Eigen::VectorXd& lambdas,
                               const Eigen::VectorXd& terminal, double big_t,
                               const std::vector<double>& times,
                               std::vector<double>& values);
void omega_norm_curve(const Eigen::MatrixXd& g, const Eigen::VectorXd& lambdas,
                      const Eigen::VectorXd& terminal, double big_t,
                      const std::vector<double>& times, std::vector<double>& values);

}  // namespace kernels
}  // namespace heatctl
