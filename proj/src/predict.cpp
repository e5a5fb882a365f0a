#include "vppe/predict.hpp"

#include "vppe/error.hpp"
#include "vppe/log.hpp"
#include "vppe/parallel.hpp"
#include "vppe/simd/dispatch.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace vppe {

// Kriging system restricted to a sorted subset of the training rows.
struct Predictor::Local {
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd x;  // normalized inputs of `rows`
  std::vector<const double*> cols;
  Cholesky chol;
  Eigen::MatrixXd alpha;  // R^-1 (Y - H beta)
  Eigen::MatrixXd zh;     // L^-1 H
  Eigen::LLT<Eigen::MatrixXd> info;
};

namespace {

constexpr double kNegativeFloor = -1e-10;
constexpr Eigen::Index kBatchBlock = 16;

simd::CorrParams corr_params(const KernelSpec& spec, const Eigen::VectorXd& inv) {
  return {spec.kernel.family, spec.kernel.alpha,
          std::span<const double>(inv.data(), static_cast<std::size_t>(inv.size()))};
}

std::unique_ptr<Predictor::Local> build_local(const FittedEmulator& model, std::vector<Eigen::Index> rows) {
  const TrainingData& data = *model.data;
  auto local = std::make_unique<Predictor::Local>();
  local->rows = std::move(rows);
  const auto idx = local->rows;
  local->x = data.x(idx, Eigen::all);
  local->cols = simd::column_pointers(local->x);
  local->chol = factorize_with_jitter(correlation_matrix(model.spec, local->x), "the prediction correlation matrix");
  const Eigen::MatrixXd h = model.trend.evaluate(local->x);
  const Eigen::MatrixXd resid = data.y(idx, Eigen::all) - h * model.beta;
  local->alpha = local->chol.llt.solve(resid);
  local->zh.resize(h.rows(), h.cols());
  if (h.cols() > 0) {
    local->zh = local->chol.llt.matrixL().solve(h);
    local->info.compute(local->zh.transpose() * local->zh);
    if (local->info.info() != Eigen::Success) throw DegenerateData("trend information matrix is singular");
  }
  return local;
}

double clamp_css(double css) {
  if (css < 0.0) {
    if (css < kNegativeFloor) {
      log_warning("negative predictive correlation term c** = " + std::to_string(css) + " clamped to 0");
    }
    return 0.0;
  }
  return css;
}

// Predictions for the columns of r (correlations with the local rows) at
// normalized inputs xs (rows).
void evaluate_local(const FittedEmulator& model, const Predictor::Local& local, const Eigen::MatrixXd& r,
                    const Eigen::MatrixXd& xs, Eigen::Ref<Eigen::MatrixXd> mean, Eigen::Ref<Eigen::MatrixXd> scale2,
                    Eigen::Ref<Eigen::VectorXd> css) {
  const Eigen::MatrixXd hs = model.trend.evaluate(xs);  // t x q
  mean.noalias() = hs * model.beta;
  mean.noalias() += r.transpose() * local.alpha;
  const Eigen::MatrixXd v = local.chol.llt.matrixL().solve(r);
  Eigen::VectorXd c = (1.0 + model.spec.nugget) - v.colwise().squaredNorm().transpose().array();
  if (hs.cols() > 0) {
    Eigen::MatrixXd g = hs.transpose();
    g.noalias() -= local.zh.transpose() * v;
    c += local.info.matrixL().solve(g).colwise().squaredNorm().transpose();
  }
  for (Eigen::Index t = 0; t < c.size(); ++t) {
    css[t] = clamp_css(c[t]);
    scale2.row(t) = css[t] * model.sigma2.transpose();
  }
}

Eigen::MatrixXd local_cross(const FittedEmulator& model, const Predictor::Local& local, const Eigen::MatrixXd& xs) {
  const Eigen::VectorXd inv = model.spec.ranges.cwiseInverse();
  const auto params = corr_params(model.spec, inv);
  const auto& table = simd::active();
  Eigen::MatrixXd r(local.x.rows(), xs.rows());
  Eigen::VectorXd anchor(xs.cols());
  for (Eigen::Index t = 0; t < xs.rows(); ++t) {
    anchor = xs.row(t).transpose();
    table.corr_row(params, anchor.data(), local.cols, static_cast<std::size_t>(local.x.rows()), r.col(t).data(), {});
  }
  return r;
}

void check_model(const FittedEmulator& model) {
  if (!model.data) throw InvalidParameter("model has no training data attached");
  if (model.beta.cols() != model.data->y.cols() || model.sigma2.size() != model.data->y.cols()) {
    throw ShapeError("model estimates do not match the training outputs");
  }
}

}  // namespace

Predictor::Predictor(const FittedEmulator& model) : model_(model) {
  check_model(model);
  scaled_ = model.data->x * model.spec.ranges.cwiseInverse().asDiagonal();
}

Predictor::~Predictor() = default;

const Predictor::Local& Predictor::full() const {
  std::call_once(full_once_, [&] {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(model_.n()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    full_ = build_local(model_, std::move(all));
  });
  return *full_;
}

Eigen::VectorXd Predictor::normalized(const Eigen::VectorXd& x) const {
  if (x.size() != model_.dims()) {
    throw ShapeError("test input has " + std::to_string(x.size()) + " dimensions, model expects " +
                     std::to_string(model_.dims()));
  }
  if (!x.allFinite()) throw ShapeError("test input is not finite");
  return normalize_points(x.transpose(), model_.lower, model_.upper).row(0).transpose();
}

PredictiveResult Predictor::predict_exact(const Eigen::VectorXd& x) const {
  const PredictionBatch b = predict_exact(Eigen::MatrixXd(x.transpose()));
  return {b.mean.row(0).transpose(), b.scale2.row(0).transpose(), b.dof, b.c_star_star[0]};
}

PredictionBatch Predictor::predict_exact(const Eigen::MatrixXd& x) const {
  if (x.cols() != model_.dims()) {
    throw ShapeError("test design has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(model_.dims()));
  }
  if (!x.allFinite()) throw ShapeError("test design contains non-finite entries");
  const Eigen::MatrixXd xs = normalize_points(x, model_.lower, model_.upper);
  const Local& local = full();
  PredictionBatch out;
  out.dof = model_.dof;
  out.mean.resize(xs.rows(), model_.outputs());
  out.scale2.resize(xs.rows(), model_.outputs());
  out.c_star_star.resize(xs.rows());
  evaluate_local(model_, local, local_cross(model_, local, xs), xs, out.mean, out.scale2, out.c_star_star);
  return out;
}

Eigen::VectorXd Predictor::ppe_weights(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd xs = normalized(x).transpose();
  const Local& local = full();
  const Eigen::VectorXd r = local_cross(model_, local, xs).col(0);
  Eigen::VectorXd w = local.chol.llt.solve(r);
  if (local.zh.cols() > 0) {
    const Eigen::VectorXd v = local.chol.llt.matrixL().solve(r);
    const Eigen::VectorXd g = model_.trend.evaluate(xs).row(0).transpose() - local.zh.transpose() * v;
    const Eigen::VectorXd zg = local.zh * local.info.solve(g);
    w += local.chol.llt.matrixU().solve(zg);
  }
  return w;
}

std::vector<Eigen::Index> Predictor::nearest(const Eigen::VectorXd& x, Eigen::Index m_pred) const {
  const Eigen::Index n = model_.n();
  if (m_pred < 1 || m_pred > n) {
    throw InvalidParameter("m_pred must satisfy 1 <= m_pred <= n (n = " + std::to_string(n) + ")");
  }
  const Eigen::VectorXd anchor = normalized(x).cwiseQuotient(model_.spec.ranges);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (m_pred < n) {
    Eigen::VectorXd dist(n);
    simd::active().sq_dist(anchor.data(), simd::column_pointers(scaled_), static_cast<std::size_t>(n), dist.data());
    const auto closer = [&](Eigen::Index a, Eigen::Index b) {
      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    std::nth_element(rows.begin(), rows.begin() + m_pred - 1, rows.end(), closer);
    rows.resize(static_cast<std::size_t>(m_pred));
    std::sort(rows.begin(), rows.end());
  }
  return rows;
}

PredictiveResult Predictor::predict_nn(const Eigen::VectorXd& x, Eigen::Index m_pred) const {
  if (m_pred == model_.n()) return predict_exact(x);
  const auto local = build_local(model_, nearest(x, m_pred));
  const Eigen::MatrixXd xs = normalized(x).transpose();
  PredictiveResult out;
  out.dof = model_.dof;
  Eigen::MatrixXd mean(1, model_.outputs()), scale2(1, model_.outputs());
  Eigen::VectorXd css(1);
  evaluate_local(model_, *local, local_cross(model_, *local, xs), xs, mean, scale2, css);
  out.mean = mean.row(0).transpose();
  out.scale2 = scale2.row(0).transpose();
  out.c_star_star = css[0];
  return out;
}

PredictionBatch Predictor::predict_nn(const Eigen::MatrixXd& x, Eigen::Index m_pred) const {
  if (x.cols() != model_.dims()) {
    throw ShapeError("test design has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(model_.dims()));
  }
  if (m_pred == model_.n()) return predict_exact(x);
  const Eigen::Index t = x.rows();
  PredictionBatch out;
  out.dof = model_.dof;
  out.mean.resize(t, model_.outputs());
  out.scale2.resize(t, model_.outputs());
  out.c_star_star.resize(t);
  const auto blocks = static_cast<std::size_t>((t + kBatchBlock - 1) / kBatchBlock);
  parallel_for_blocks(blocks, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBatchBlock;
    const Eigen::Index end = std::min(t, begin + kBatchBlock);
    for (Eigen::Index i = begin; i < end; ++i) {
      const PredictiveResult r = predict_nn(Eigen::VectorXd(x.row(i).transpose()), m_pred);
      out.mean.row(i) = r.mean.transpose();
      out.scale2.row(i) = r.scale2.transpose();
      out.c_star_star[i] = r.c_star_star;
    }
  });
  return out;
}

Interval predictive_interval(const PredictionBatch& batch, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("interval level must lie in (0, 1)");
  if (batch.dof < 1) throw InvalidParameter("predictive distribution needs dof >= 1");
  const boost::math::students_t dist(static_cast<double>(batch.dof));
  const double tq = boost::math::quantile(dist, 0.5 + level / 2.0);
  const Eigen::MatrixXd half = tq * batch.sd();
  return {batch.mean - half, batch.mean + half};
}

PredictiveResult predict_exact(const FittedEmulator& model, const Eigen::VectorXd& x) {
  return Predictor(model).predict_exact(x);
}

Eigen::VectorXd ppe_weights(const FittedEmulator& model, const Eigen::VectorXd& x) {
  return Predictor(model).ppe_weights(x);
}

PredictiveResult predict_nn(const FittedEmulator& model, const Eigen::VectorXd& x, Eigen::Index m_pred) {
  return Predictor(model).predict_nn(x, m_pred);
}

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ShapeError("prediction and truth shapes differ");
  }
  if (pred.size() == 0) throw InvalidParameter("cannot compute RMSE of an empty set");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double relative_rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  const double e = rmse(pred, truth);
  const double denom = std::sqrt(truth.squaredNorm() / static_cast<double>(truth.size()));
  if (!(denom > 0.0)) throw DegenerateData("relative RMSE undefined: truth is identically zero");
  return e / denom;
}

}  // namespace vppe
