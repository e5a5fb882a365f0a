#include "vppe/prior.hpp"

#include "vppe/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vppe {

void PriorSpec::validate() const {
  if (kind == PriorKind::None) return;
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("prior hyperparameters a and b must be positive");
  if (c.size() == 0 || !(c.array() > 0.0).all()) {
    throw InvalidParameter("prior scale constants C_l must be positive");
  }
}

double mean_pairwise_abs_diff(const Eigen::VectorXd& column) {
  const Eigen::Index n = column.size();
  if (n < 2) return 0.0;
  std::vector<double> v(column.data(), column.data() + n);
  std::sort(v.begin(), v.end());
  // sum_{i<j} (v_j - v_i) = sum_j v_j (2j - n + 1) for sorted v (0-based j).
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) total += v[static_cast<std::size_t>(j)] * static_cast<double>(2 * j - n + 1);
  return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

PriorSpec default_jr_prior(const Eigen::MatrixXd& x, double a) {
  PriorSpec prior;
  prior.kind = PriorKind::JointlyRobust;
  prior.a = a;
  const auto n = static_cast<double>(x.rows());
  const auto p = static_cast<double>(x.cols());
  prior.b = std::pow(n, -1.0 / p) * (a + p);
  prior.c.resize(x.cols());
  for (Eigen::Index l = 0; l < x.cols(); ++l) prior.c[l] = mean_pairwise_abs_diff(x.col(l));
  prior.validate();
  return prior;
}

PriorValue jr_prior_neg2log(const Eigen::VectorXd& lambda, const PriorSpec& prior,
                            std::optional<double> nugget) {
  if (!(lambda.array() > 0.0).all() || !lambda.allFinite()) {
    throw InvalidParameter("range parameters must be positive");
  }
  PriorValue out;
  const Eigen::Index p = lambda.size();
  out.grad = Eigen::VectorXd::Zero(p + (nugget ? 1 : 0));
  if (prior.kind == PriorKind::None) return out;
  if (prior.c.size() != p) throw InvalidParameter("prior scale constants do not match the range dimension");

  double s = (prior.c.array() / lambda.array()).sum();
  if (nugget) s += *nugget;
  out.value = -2.0 * prior.a * std::log(s) + 2.0 * prior.b * s;
  const double ds = -2.0 * prior.a / s + 2.0 * prior.b;
  for (Eigen::Index l = 0; l < p; ++l) out.grad[l] = ds * (-prior.c[l] / (lambda[l] * lambda[l]));
  if (nugget) out.grad[p] = ds;
  return out;
}

}  // namespace vppe
