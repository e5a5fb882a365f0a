#include "vppe/linalg.hpp"

#include "vppe/error.hpp"

#include <cmath>

namespace vppe {

double Cholesky::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Cholesky factorize_with_jitter(const Eigen::MatrixXd& a, const std::string& what) {
  Cholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;
  for (double delta = kJitterStart; delta <= kJitterMax * 1.0000001; delta *= 10.0) {
    Eigen::MatrixXd jittered = a;
    jittered.diagonal().array() += delta;
    out.llt.compute(jittered);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = delta;
      return out;
    }
  }
  throw ConditioningError("Cholesky factorization of " + what + " failed after jitter up to 1e-6");
}

double cholesky_in_place_with_jitter(Eigen::Ref<Eigen::MatrixXd> a, Eigen::Ref<Eigen::MatrixXd> scratch) {
  scratch.triangularView<Eigen::Lower>() = a.triangularView<Eigen::Lower>();
  double delta = 0.0;
  while (true) {
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
    if (llt.info() == Eigen::Success) return delta;
    delta = delta == 0.0 ? kJitterStart : delta * 10.0;
    if (delta > kJitterMax * 1.0000001) return -1.0;
    a.triangularView<Eigen::Lower>() = scratch.triangularView<Eigen::Lower>();
    a.diagonal().array() += delta;
  }
}

}  // namespace vppe
