#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace vppe {

enum class KernelFamily { PowerExponential, Matern32, Matern52 };

// One-dimensional correlation family. alpha is the power-exponential roughness
// and is ignored by the Matern families; it is a fixed hyperparameter.
struct Kernel {
  KernelFamily family = KernelFamily::Matern32;
  double alpha = 2.0;
};

// Product-form correlation over p input dimensions plus the nugget-variance
// ratio nu^2 = sigma_eta^2 / sigma^2.
struct KernelSpec {
  Kernel kernel;
  Eigen::VectorXd ranges;
  double nugget = 0.0;

  [[nodiscard]] Eigen::Index dims() const { return ranges.size(); }
  // Throws InvalidParameter unless ranges are positive and finite, alpha lies
  // in [1,2] and the nugget is nonnegative.
  void validate() const;
};

struct CorrDerivs {
  double value = 1.0;
  Eigen::VectorXd d_dlambda;
};

using ConstPoint = Eigen::Ref<const Eigen::VectorXd, 0, Eigen::InnerStride<>>;

// c_l(d; lambda) for a single dimension.
double corr_1d(const Kernel& kernel, double d, double lambda);

// d c_l / d lambda. Exactly zero at d = 0 for every family.
double corr_1d_dlambda(const Kernel& kernel, double d, double lambda);

double corr_product(const KernelSpec& spec, const ConstPoint& x_i, const ConstPoint& x_j);

CorrDerivs corr_product_grad(const KernelSpec& spec, const ConstPoint& x_i, const ConstPoint& x_j);

// Config names: "pow_exp:<alpha>", "matern32", "matern52".
Kernel parse_kernel(std::string_view name);
std::string to_string(const Kernel& kernel);

// Dense correlation matrix of the rows of x (nugget added on the diagonal).
Eigen::MatrixXd correlation_matrix(const KernelSpec& spec, const Eigen::MatrixXd& x);

// n_a x n_b cross correlations between the rows of a and the rows of b.
Eigen::MatrixXd cross_correlation(const KernelSpec& spec, const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b);

}  // namespace vppe
