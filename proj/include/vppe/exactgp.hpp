#pragma once

#include "vppe/kernels.hpp"
#include "vppe/linalg.hpp"
#include "vppe/prior.hpp"
#include "vppe/trend.hpp"
#include "vppe/vecchia.hpp"

#include <Eigen/Dense>

#include <memory>

namespace vppe {

struct ExactEval {
  double neg2log = 0.0;  // same constants as the Vecchia path
  Eigen::VectorXd grad;
  Eigen::VectorXd s2;    // S^2 = y^T Q y per output
  Eigen::MatrixXd beta;  // GLS estimate, q x k
  double log_det_r = 0.0;
  double log_det_info = 0.0;  // log |H^T R~^-1 H|
  double log_prior_term = 0.0;
  std::shared_ptr<const Cholesky> factor;  // of R + nu^2 I
};

// x holds normalized inputs. Throws ConditioningError when R + nu^2 I cannot
// be factorized and DegenerateData when n <= q, H^T R~^-1 H is singular or
// some S^2 <= 0.
ExactEval exact_marginal_neg2log(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                                 TrendBasis trend, const PriorSpec& prior,
                                 GradientMode mode = GradientMode::None);

// (H^T R~^-1 H)^-1 H^T R~^-1 Y
Eigen::MatrixXd gls_beta(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                         TrendBasis trend);

// (n - q)^-1 (y_j - H beta_j)^T R~^-1 (y_j - H beta_j) per output column.
Eigen::VectorXd sigma2_hat(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                           TrendBasis trend, const Eigen::MatrixXd& beta);

}  // namespace vppe
