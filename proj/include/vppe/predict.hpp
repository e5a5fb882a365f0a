#pragma once

#include "vppe/fitting.hpp"
#include "vppe/linalg.hpp"

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <vector>

namespace vppe {

// Student-t predictive distribution at one input: each output j is
// mean_j + sqrt(scale2_j) * T_dof.
struct PredictiveResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale2;  // sigma2_j * c**
  Eigen::Index dof = 0;
  double c_star_star = 0.0;
};

struct PredictionBatch {
  Eigen::MatrixXd mean;    // t x k
  Eigen::MatrixXd scale2;  // t x k
  Eigen::VectorXd c_star_star;
  Eigen::Index dof = 0;

  [[nodiscard]] Eigen::MatrixXd sd() const { return scale2.cwiseSqrt(); }
};

struct Interval {
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
};

// Equal-tailed predictive interval with coverage `level` in (0, 1).
Interval predictive_interval(const PredictionBatch& batch, double level);

// Read-only predictor over a fitted model. Inputs are in raw (unnormalized)
// units. The full-data factorization is built on first use and shared.
class Predictor {
 public:
  explicit Predictor(const FittedEmulator& model);
  ~Predictor();
  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  [[nodiscard]] PredictiveResult predict_exact(const Eigen::VectorXd& x) const;
  [[nodiscard]] PredictionBatch predict_exact(const Eigen::MatrixXd& x) const;
  [[nodiscard]] Eigen::VectorXd ppe_weights(const Eigen::VectorXd& x) const;
  [[nodiscard]] PredictiveResult predict_nn(const Eigen::VectorXd& x, Eigen::Index m_pred) const;
  [[nodiscard]] PredictionBatch predict_nn(const Eigen::MatrixXd& x, Eigen::Index m_pred) const;

  // Sorted training rows nearest to x in the lambda-hat scaled metric.
  [[nodiscard]] std::vector<Eigen::Index> nearest(const Eigen::VectorXd& x, Eigen::Index m_pred) const;

  struct Local;

 private:
  const Local& full() const;
  [[nodiscard]] Eigen::VectorXd normalized(const Eigen::VectorXd& x) const;

  const FittedEmulator& model_;
  Eigen::MatrixXd scaled_;  // normalized training inputs divided by lambda-hat
  mutable std::once_flag full_once_;
  mutable std::unique_ptr<Local> full_;
};

PredictiveResult predict_exact(const FittedEmulator& model, const Eigen::VectorXd& x);
Eigen::VectorXd ppe_weights(const FittedEmulator& model, const Eigen::VectorXd& x);
PredictiveResult predict_nn(const FittedEmulator& model, const Eigen::VectorXd& x, Eigen::Index m_pred);

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
// RMSE divided by the root mean square of the truth.
double relative_rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

}  // namespace vppe
