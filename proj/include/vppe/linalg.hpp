#pragma once

#include <Eigen/Dense>

#include <string>

namespace vppe {

// Diagonal jitter escalation used for every correlation factorization: try the
// matrix as given, then add delta = 1e-10, 1e-9, ..., 1e-6 to the diagonal.
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

struct Cholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  [[nodiscard]] Eigen::Index size() const { return llt.matrixLLT().rows(); }
  // log det of the factorized (jittered) matrix.
  [[nodiscard]] double log_det() const;
};

// Throws ConditioningError naming `what` when no jitter level succeeds.
Cholesky factorize_with_jitter(const Eigen::MatrixXd& a, const std::string& what);

// In-place variant for small workspace matrices. `a` holds the lower triangle on
// input and the Cholesky factor on success; `scratch` keeps a pristine copy for
// retries. Returns the jitter used, or a negative value on failure.
double cholesky_in_place_with_jitter(Eigen::Ref<Eigen::MatrixXd> a, Eigen::Ref<Eigen::MatrixXd> scratch);

}  // namespace vppe
