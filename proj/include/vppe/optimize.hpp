#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace vppe {

// Returns the objective at x and writes the gradient when grad is non-null.
// A non-finite value or a thrown vppe::Error marks the point as infeasible.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimizerOptions {
  int max_iterations = 100;
  double function_tolerance = 1e-8;   // relative objective change
  double gradient_tolerance = 1e-5;   // infinity norm of the gradient
  double parameter_tolerance = 1e-10;
};

struct OptState {
  Eigen::VectorXd start;
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool skipped = false;  // objective not finite at the seed
  std::string status;
  std::vector<double> trace;  // objective after each accepted iteration
};

struct OptResult {
  OptState best;
  std::vector<OptState> runs;  // one per seed, in seed order
};

// L-BFGS from each seed; returns the terminal state with the lowest objective
// (earliest seed on ties). Throws FitError when every seed is skipped.
OptResult optimize(const ObjectiveFn& objective, const std::vector<Eigen::VectorXd>& seeds,
                   const OptimizerOptions& options = {});

}  // namespace vppe
