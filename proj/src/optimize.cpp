#include "vppe/optimize.hpp"

#include "vppe/error.hpp"
#include "vppe/log.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vppe {
namespace {

class CeresObjective final : public ceres::FirstOrderFunction {
 public:
  CeresObjective(const ObjectiveFn& fn, int dims, int* evaluations)
      : fn_(fn), dims_(dims), evaluations_(evaluations) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    ++*evaluations_;
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(parameters, dims_);
    Eigen::VectorXd grad;
    double value = 0.0;
    try {
      value = fn_(x, gradient != nullptr ? &grad : nullptr);
    } catch (const Error&) {
      return false;
    }
    if (!std::isfinite(value)) return false;
    if (gradient != nullptr) {
      if (grad.size() != dims_ || !grad.allFinite()) return false;
      Eigen::Map<Eigen::VectorXd>(gradient, dims_) = grad;
    }
    *cost = value;
    return true;
  }

  int NumParameters() const override { return dims_; }

 private:
  const ObjectiveFn& fn_;
  int dims_;
  int* evaluations_;
};

double safe_value(const ObjectiveFn& fn, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  try {
    return fn(x, grad);
  } catch (const Error& e) {
    log_warning(std::string("objective failed at seed: ") + e.what());
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

OptResult optimize(const ObjectiveFn& objective, const std::vector<Eigen::VectorXd>& seeds,
                   const OptimizerOptions& options) {
  if (seeds.empty()) throw InvalidParameter("optimizer needs at least one seed");
  OptResult result;
  bool have_best = false;
  for (const Eigen::VectorXd& seed : seeds) {
    OptState state;
    state.start = seed;
    state.x = seed;
    Eigen::VectorXd grad;
    const double initial = safe_value(objective, seed, &grad);
    state.evaluations = 1;
    if (!std::isfinite(initial) || grad.size() != seed.size() || !grad.allFinite()) {
      state.skipped = true;
      state.value = std::numeric_limits<double>::quiet_NaN();
      state.status = "skipped: objective not finite at seed";
      log_warning("optimizer seed skipped: objective not finite at the starting point");
      result.runs.push_back(std::move(state));
      continue;
    }

    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.max_num_iterations = options.max_iterations;
    opts.function_tolerance = options.function_tolerance;
    opts.gradient_tolerance = options.gradient_tolerance;
    opts.parameter_tolerance = options.parameter_tolerance;
    opts.logging_type = ceres::SILENT;
    opts.minimizer_progress_to_stdout = false;

    int evaluations = 0;
    ceres::GradientProblem problem(new CeresObjective(objective, static_cast<int>(seed.size()), &evaluations));
    Eigen::VectorXd x = seed;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, x.data(), &summary);

    state.evaluations += evaluations;
    state.x = x;
    state.iterations = std::max(0, static_cast<int>(summary.iterations.size()) - 1);
    state.converged = summary.termination_type == ceres::CONVERGENCE;
    state.status = summary.message;
    for (const auto& it : summary.iterations) {
      if (it.step_is_valid) state.trace.push_back(it.cost);
    }
    state.value = safe_value(objective, x, &state.gradient);
    ++state.evaluations;
    if (!std::isfinite(state.value)) {
      // Ceres only returns points it evaluated successfully, so this indicates
      // a nondeterministic objective; keep the seed as a failed run.
      state.skipped = true;
      state.status = "objective not finite at the returned point";
    }
    result.runs.push_back(state);
    if (!state.skipped && (!have_best || state.value < result.best.value)) {
      result.best = state;
      have_best = true;
    }
  }
  if (!have_best) throw FitError("optimizer: the objective was not finite at any seed");
  return result;
}

}  // namespace vppe
