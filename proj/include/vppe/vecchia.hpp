#pragma once

#include "vppe/kernels.hpp"
#include "vppe/ordering.hpp"
#include "vppe/prior.hpp"
#include "vppe/trend.hpp"

#include <Eigen/Dense>

#include <vector>

namespace vppe {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Which partial derivatives to return with a likelihood evaluation. Gradients
// are taken with respect to the natural parameters lambda_1..lambda_p and, for
// RangesAndNugget, nu^2 as the last entry.
enum class GradientMode { None, Ranges, RangesAndNugget };

// Per ordered position i (the plan's order), for the neighbour set N = b(i):
//   omega_i   = 1 + nu^2 - r^T (R_N + nu^2 I)^-1 r
//   w_i       = (R_N + nu^2 I)^-1 r
//   h~_i      = h(x_i) - H_N^T w_i
//   g_i       = y_i - Y_N^T w_i          (one entry per output column)
struct VecchiaFactors {
  Eigen::VectorXd omega;
  Eigen::MatrixXd h_tilde;      // n x q
  Eigen::MatrixXd g;            // n x k
  std::vector<double> weights;  // aligned with plan.flat
  double max_jitter = 0.0;

  [[nodiscard]] Eigen::Index size() const { return omega.size(); }
};

struct MarginalEval {
  double neg2log = 0.0;  // -2 log marginal posterior, constants dropped
  Eigen::VectorXd grad;  // empty for GradientMode::None
  Eigen::VectorXd s2;    // S~^2 per output
  Eigen::MatrixXd sigma_tilde;
  Eigen::MatrixXd mu;  // Sigma~^-1 sum_i h~_i g_i^T / omega_i  (q x k)
  double sum_log_omega = 0.0;
  double log_det_sigma = 0.0;
  double log_prior_term = 0.0;  // the -2 log pi contribution
  double max_jitter = 0.0;
};

// Training data permuted into plan order, ready for repeated evaluation at
// different kernel parameters. x holds normalized inputs (rows = design rows).
class VecchiaModel {
 public:
  VecchiaModel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, ConditioningPlan plan, TrendBasis trend);

  [[nodiscard]] const ConditioningPlan& plan() const { return plan_; }
  [[nodiscard]] Eigen::Index n() const { return x_.rows(); }
  [[nodiscard]] Eigen::Index dims() const { return x_.cols(); }
  [[nodiscard]] Eigen::Index trend_size() const { return h_.cols(); }
  [[nodiscard]] Eigen::Index outputs() const { return y_.cols(); }

  [[nodiscard]] VecchiaFactors factors(const KernelSpec& spec) const;

  // Fused factor computation and accumulation; with a gradient mode the
  // derivative chains are carried alongside. Values are bitwise identical to
  // vecchia_marginal_neg2log(factors(spec), ...).
  [[nodiscard]] MarginalEval evaluate(const KernelSpec& spec, const PriorSpec& prior,
                                      GradientMode mode = GradientMode::None) const;

 private:
  ConditioningPlan plan_;
  Eigen::MatrixXd x_;  // n x p, plan order
  RowMatrix y_;        // n x k, plan order
  RowMatrix h_;        // n x q, plan order
};

VecchiaFactors vecchia_factors(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                               const ConditioningPlan& plan, const KernelSpec& spec, TrendBasis trend);

// Throws DegenerateData when n <= q, Sigma~ is singular or some S~^2 <= 0.
MarginalEval vecchia_marginal_neg2log(const VecchiaFactors& factors, const KernelSpec& spec,
                                      const PriorSpec& prior);

Eigen::VectorXd vecchia_marginal_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                      const ConditioningPlan& plan, const KernelSpec& spec,
                                      TrendBasis trend, const PriorSpec& prior,
                                      GradientMode mode = GradientMode::Ranges);

struct ProfiledEval {
  double value = 0.0;   // n sigma_m^2 + sum_i log omega_i
  double sigma2 = 0.0;  // (1/n) sum_i (g_i - h~_i^T beta_m)^2 / omega_i
  Eigen::VectorXd beta;
};

// Single-output diagnostic; throws InvalidParameter for k != 1.
ProfiledEval profiled_neg2log(const VecchiaFactors& factors);

// -2 log prior with a gradient sized for `mode` (zero nugget entry when the
// prior does not include the nugget).
PriorValue prior_term(const KernelSpec& spec, const PriorSpec& prior, GradientMode mode);

}  // namespace vppe
