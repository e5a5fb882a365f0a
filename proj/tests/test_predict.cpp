#include "oracles.hpp"
#include "vppe/error.hpp"
#include "vppe/exactgp.hpp"
#include "vppe/predict.hpp"

#include <doctest.h>

#include <cmath>

using namespace vppe;

namespace {

// Model at fixed parameters on inputs already in [0,1].
FittedEmulator fixed_model(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                           TrendBasis trend) {
  FittedEmulator m;
  m.spec = spec;
  m.trend = trend;
  m.data = std::make_shared<TrainingData>(TrainingData{x, y});
  m.beta = gls_beta(x, y, spec, trend);
  m.sigma2 = sigma2_hat(x, y, spec, trend, m.beta);
  m.dof = x.rows() - trend.size(x.cols());
  m.method = FitMethod::Exact;
  m.lower = Eigen::VectorXd::Zero(x.cols());
  m.upper = Eigen::VectorXd::Ones(x.cols());
  return m;
}

struct Case {
  Eigen::MatrixXd x, y;
  KernelSpec spec;
  TrendBasis trend;
};

Case random_case(oracle::Gen& g, Eigen::Index n, Eigen::Index p, Eigen::Index k, TrendBasis trend) {
  Case c;
  c.x = g.matrix(n, p);
  c.y = oracle::smooth_outputs(g, c.x, k);
  c.spec = g.spec(p, 0.1, 0.4);
  c.trend = trend;
  return c;
}

}  // namespace

TEST_SUITE("predict") {
  TEST_CASE("interpolates every training point") {
    oracle::Gen g(1);
    for (const TrendKind kind : {TrendKind::Constant, TrendKind::Linear}) {
      const Case c = random_case(g, 60, 2, 3, TrendBasis{kind});
      const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
      const Predictor pr(m);
      const PredictionBatch b = pr.predict_exact(c.x);
      CHECK((b.mean - c.y).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(b.c_star_star.cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(b.dof == m.dof);
    }
  }

  TEST_CASE("far-field limit") {
    oracle::Gen g(2);
    const Case c = random_case(g, 30, 2, 2, TrendBasis{TrendKind::Constant});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    const PredictiveResult r = predict_exact(m, Eigen::Vector2d(1e3, -1e3));
    const Eigen::MatrixXd rinv = oracle::corr_matrix(c.spec, c.x).inverse();
    const double denom = rinv.sum();
    CHECK((r.mean - m.beta.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.c_star_star == doctest::Approx(1.0 + 1.0 / denom).epsilon(1e-9));
    CHECK((r.scale2 - m.sigma2 * r.c_star_star).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("degrees of freedom") {
    oracle::Gen g(3);
    const Case c = random_case(g, 300, 2, 1, TrendBasis{TrendKind::Constant});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    CHECK(predict_exact(m, Eigen::Vector2d(0.5, 0.5)).dof == 299);
  }

  TEST_CASE("weights: oracle, sum to one, reproduce the mean") {
    oracle::Gen g(4);
    for (int trial = 0; trial < 20; ++trial) {
      const TrendBasis trend = trial % 2 ? TrendBasis{TrendKind::Linear} : TrendBasis{TrendKind::Constant};
      // p >= 2 keeps cond(R) moderate; in one dimension smooth kernels reach 1e15.
      const Case c = random_case(g, g.integer(10, 60), g.integer(2, 3), 4, trend);
      const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
      const Predictor pr(m);
      const Eigen::MatrixXd r_mat = oracle::corr_matrix(c.spec, c.x);
      const Eigen::MatrixXd rinv = r_mat.inverse();
      const Eigen::MatrixXd h = c.trend.evaluate(c.x);
      for (int s = 0; s < 10; ++s) {
        const Eigen::VectorXd xs = g.matrix(c.x.cols(), 1, -0.2, 1.2).col(0);
        const Eigen::VectorXd w = pr.ppe_weights(xs);
        Eigen::VectorXd r(c.x.rows());
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = oracle::corr(c.spec, xs, c.x.row(i).transpose());
        const Eigen::VectorXd hs = c.trend.evaluate(xs.transpose()).row(0).transpose();
        const Eigen::MatrixXd a = h.transpose() * rinv * h;
        const Eigen::VectorXd expect = rinv * r + rinv * h * a.inverse() * (hs - h.transpose() * rinv * r);
        CHECK((w - expect).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
        CHECK(std::fabs(w.sum() - 1.0) <= 1e-10);
        const Eigen::VectorXd mean = pr.predict_exact(xs).mean;
        CHECK((c.y.transpose() * w - mean).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }

  TEST_CASE("weights at a training point are a basis vector") {
    oracle::Gen g(5);
    const Case c = random_case(g, 25, 2, 1, TrendBasis{TrendKind::Constant});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    const Predictor pr(m);
    for (Eigen::Index i = 0; i < 25; i += 6) {
      const Eigen::VectorXd w = pr.ppe_weights(c.x.row(i).transpose());
      Eigen::VectorXd e = Eigen::VectorXd::Zero(25);
      e[i] = 1.0;
      CHECK((w - e).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("c** is nonnegative across random inputs") {
    oracle::Gen g(6);
    const Case c = random_case(g, 80, 3, 1, TrendBasis{TrendKind::Linear});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    const Predictor pr(m);
    const PredictionBatch b = pr.predict_exact(g.matrix(500, 3, -0.5, 1.5));
    CHECK(b.c_star_star.minCoeff() >= 0.0);
    CHECK((b.scale2.array() >= 0.0).all());
  }

  TEST_CASE("nearest-neighbour prediction") {
    oracle::Gen g(7);
    const Case c = random_case(g, 70, 2, 3, TrendBasis{TrendKind::Constant});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    const Predictor pr(m);
    const Eigen::MatrixXd xt = g.matrix(40, 2);
    const PredictionBatch full = pr.predict_exact(xt);
    const PredictionBatch all = pr.predict_nn(xt, 70);
    CHECK((full.mean - all.mean).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((full.c_star_star - all.c_star_star).cwiseAbs().maxCoeff() <= 1e-12);

    // Refinement: error shrinks as the neighbour set grows.
    double prev = INFINITY;
    for (const Eigen::Index mp : {5, 20, 50, 70}) {
      const double dev = (pr.predict_nn(xt, mp).mean - full.mean).cwiseAbs().maxCoeff();
      CHECK(dev <= prev + 1e-12);
      prev = dev;
    }
    CHECK(prev == 0.0);

    for (Eigen::Index i = 0; i < 70; i += 9) {
      const PredictiveResult r = pr.predict_nn(Eigen::VectorXd(c.x.row(i).transpose()), 1);
      CHECK((r.mean - c.y.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::fabs(r.c_star_star) < 1e-12);
    }
    CHECK_THROWS_AS((void)pr.predict_nn(Eigen::VectorXd(Eigen::Vector2d(0.5, 0.5)), 0), InvalidParameter);
    CHECK_THROWS_AS((void)pr.predict_nn(Eigen::VectorXd(Eigen::Vector2d(0.5, 0.5)), 71), InvalidParameter);
    CHECK_THROWS_AS((void)pr.predict_exact(Eigen::VectorXd(Eigen::Vector3d(0.5, 0.5, 0.5))), ShapeError);
  }

  TEST_CASE("nearest agrees with brute force in the scaled metric") {
    oracle::Gen g(8);
    const Case c = random_case(g, 100, 3, 1, TrendBasis{TrendKind::Constant});
    const FittedEmulator m = fixed_model(c.x, c.y, c.spec, c.trend);
    const Predictor pr(m);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd xs = g.matrix(3, 1).col(0);
      const auto got = pr.nearest(xs, 12);
      std::vector<std::pair<double, Eigen::Index>> d;
      for (Eigen::Index i = 0; i < 100; ++i)
        d.emplace_back((c.x.row(i).transpose() - xs).cwiseQuotient(c.spec.ranges).squaredNorm(), i);
      std::sort(d.begin(), d.end());
      std::vector<Eigen::Index> want;
      for (int i = 0; i < 12; ++i) want.push_back(d[static_cast<std::size_t>(i)].second);
      std::sort(want.begin(), want.end());
      CHECK(got == want);
    }
  }

  TEST_CASE("rmse and relative rmse") {
    const Eigen::MatrixXd truth = (Eigen::MatrixXd(2, 2) << 3, -4, 0, 0).finished();
    CHECK(rmse(truth, truth) == 0.0);
    CHECK(relative_rmse(truth, truth) == 0.0);
    const Eigen::MatrixXd shifted = truth.array() + 0.5;
    CHECK(rmse(shifted, truth) == doctest::Approx(0.5));
    CHECK(relative_rmse(shifted, truth) == doctest::Approx(0.5 / 2.5));
    CHECK(relative_rmse(7.0 * shifted, 7.0 * truth) == doctest::Approx(relative_rmse(shifted, truth)).epsilon(1e-14));
    CHECK_THROWS_AS(rmse(Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 1)), InvalidParameter);
    CHECK_THROWS_AS(rmse(truth, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
  }

  TEST_CASE("predictive intervals") {
    PredictionBatch b;
    b.mean = Eigen::MatrixXd::Constant(1, 1, 2.0);
    b.scale2 = Eigen::MatrixXd::Constant(1, 1, 4.0);
    b.dof = 10;
    const Interval iv = predictive_interval(b, 0.95);
    CHECK(iv.upper(0, 0) == doctest::Approx(2.0 + 2.0 * 2.2281388519862747).epsilon(1e-12));
    CHECK(iv.lower(0, 0) == doctest::Approx(2.0 - 2.0 * 2.2281388519862747).epsilon(1e-12));
    CHECK_THROWS_AS(predictive_interval(b, 1.0), InvalidParameter);
    // Cauchy case: the 0.75 quantile is tan(pi/4) = 1.
    b.dof = 1;
    CHECK(predictive_interval(b, 0.5).upper(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  }
}
