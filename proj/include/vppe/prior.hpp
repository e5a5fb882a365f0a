#pragma once

#include <Eigen/Dense>

#include <optional>

namespace vppe {

enum class PriorKind { JointlyRobust, None };

// Jointly robust prior on the range parameters,
//   pi(lambda) = (sum_l C_l / lambda_l)^a * exp(-b * sum_l C_l / lambda_l).
// When the nugget is estimated it joins the sum as an extra term nu^2.
struct PriorSpec {
  PriorKind kind = PriorKind::JointlyRobust;
  double a = 0.2;
  double b = 1.0;
  Eigen::VectorXd c;
  bool include_nugget = false;  // set when nu^2 is estimated

  void validate() const;
};

inline PriorSpec no_prior() {
  PriorSpec p;
  p.kind = PriorKind::None;
  return p;
}

// Defaults for a normalized design: a = 0.2, b = n^(-1/p) (a + p), C_l the mean
// absolute pairwise difference in column l.
PriorSpec default_jr_prior(const Eigen::MatrixXd& x, double a = 0.2);

// Mean of |x_i - x_j| over ordered pairs i != j (O(n log n) via sorting).
double mean_pairwise_abs_diff(const Eigen::VectorXd& column);

struct PriorValue {
  double value = 0.0;    // -2 log pi, additive constants dropped
  Eigen::VectorXd grad;  // d/d lambda_l, then d/d nu^2 when a nugget is passed
};

// Throws InvalidParameter for nonpositive ranges.
PriorValue jr_prior_neg2log(const Eigen::VectorXd& lambda, const PriorSpec& prior,
                            std::optional<double> nugget = std::nullopt);

}  // namespace vppe
