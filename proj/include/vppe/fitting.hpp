#pragma once

#include "vppe/design.hpp"
#include "vppe/kernels.hpp"
#include "vppe/optimize.hpp"
#include "vppe/ordering.hpp"
#include "vppe/prior.hpp"
#include "vppe/trend.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vppe {

enum class FitMethod { Vecchia, Exact };

std::string to_string(FitMethod method);
FitMethod parse_method(std::string_view name);

// Normalized training inputs and all output columns.
struct TrainingData {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};

struct FitOptions {
  FitMethod method = FitMethod::Vecchia;
  int m = 30;
  int scaling_rounds = 2;
  PriorKind prior = PriorKind::JointlyRobust;
  double prior_a = 0.2;
  bool estimate_nugget = false;
  double nugget = 0.0;  // fixed value, or the starting value when estimated
  OptimizerOptions optimizer;
  // Seeds in normalized units are small_factor * C_l and large_factor * C_l.
  double small_seed_factor = 0.5;
  double large_seed_factor = 50.0;
  Eigen::Index exact_threshold = 4000;  // GLS beta / sigma^2 up to this n
  double output_fraction = 1.0;
  std::uint64_t output_seed = 0;
  std::optional<std::uint64_t> ordering_seed;  // random first maximin point
  bool require_convergence = true;
};

struct SeedReport {
  int round = 0;
  Eigen::VectorXd start_ranges;
  Eigen::VectorXd end_ranges;
  double start_nugget = 0.0;
  double end_nugget = 0.0;
  double objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool skipped = false;
  std::string status;
};

struct FitDiagnostics {
  std::vector<SeedReport> seeds;
  double wall_seconds = 0.0;
  double objective = 0.0;
  Eigen::Index range_outputs = 0;  // output columns used to estimate the ranges
  bool beta_from_vecchia = false;
};

struct FittedEmulator {
  KernelSpec spec;  // lambda-hat in normalized units
  TrendBasis trend;
  Eigen::MatrixXd beta;    // q x k
  Eigen::VectorXd sigma2;  // k
  std::optional<ConditioningPlan> plan;
  Eigen::Index dof = 0;
  FitMethod method = FitMethod::Vecchia;
  int m = 0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  PriorSpec prior;
  bool nugget_estimated = false;
  FitDiagnostics diagnostics;
  std::shared_ptr<const TrainingData> data;
  std::string design_path;
  std::string output_path;

  [[nodiscard]] Eigen::Index n() const { return data ? data->x.rows() : 0; }
  [[nodiscard]] Eigen::Index dims() const { return spec.dims(); }
  [[nodiscard]] Eigen::Index outputs() const { return sigma2.size(); }
};

// Sorted column indices: floor(fraction * k) columns drawn without replacement
// (all columns when fraction == 1). Throws InvalidParameter for an empty draw.
std::vector<Eigen::Index> subsample_outputs(Eigen::Index k, double fraction, std::uint64_t seed);

// Scaled Vecchia (or exact) marginal posterior mode of the ranges followed by
// beta and sigma^2. The design is normalized with its own bounds.
FittedEmulator fit(const DesignMatrix& design, const OutputMatrix& outputs, Kernel kernel, TrendBasis trend,
                   const FitOptions& options = {});

}  // namespace vppe
