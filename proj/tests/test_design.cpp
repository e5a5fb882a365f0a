#include "oracles.hpp"
#include "vppe/design.hpp"
#include "vppe/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace vppe;

TEST_SUITE("design") {
  TEST_CASE("latin hypercube stratification") {
    const DesignMatrix two = lhs_sample(2, 1, 4);
    const double lo = std::min(two.points(0, 0), two.points(1, 0));
    const double hi = std::max(two.points(0, 0), two.points(1, 0));
    CHECK(lo >= 0.0);
    CHECK(lo < 0.5);
    CHECK(hi >= 0.5);
    CHECK(hi < 1.0);

    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const DesignMatrix d = lhs_sample(100, 4, seed);
      CHECK(d.normalized);
      for (Eigen::Index l = 0; l < 4; ++l) {
        std::vector<int> count(100, 0);
        for (Eigen::Index i = 0; i < 100; ++i) ++count[static_cast<std::size_t>(std::floor(d.points(i, l) * 100))];
        CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));
      }
    }
  }

  TEST_CASE("latin hypercube determinism and argument checks") {
    CHECK(lhs_sample(50, 3, 9).points == lhs_sample(50, 3, 9).points);
    CHECK(lhs_sample(50, 3, 9).points != lhs_sample(50, 3, 10).points);
    CHECK_THROWS_AS(lhs_sample(0, 3, 1), InvalidParameter);
    CHECK_THROWS_AS(lhs_sample(3, 0, 1), InvalidParameter);
  }

  TEST_CASE("design validation") {
    Eigen::MatrixXd pts(3, 2);
    pts << 0, 0, 1, 1, 0, 1e-13;
    CHECK_THROWS_AS(DesignMatrix::from_points(pts).validate(), DegenerateData);
    pts(2, 1) = 1e-9;
    CHECK_NOTHROW(DesignMatrix::from_points(pts).validate());
    pts(1, 1) = std::nan("");
    CHECK_THROWS_AS(DesignMatrix::from_points(pts).validate(), ShapeError);
  }

  TEST_CASE("normalization") {
    Eigen::MatrixXd pts(3, 2);
    pts << 2, 5, 7, 5.5, 12, 6;
    const DesignMatrix n = normalize(DesignMatrix::from_points(pts));
    CHECK(n.points(0, 0) == 0.0);
    CHECK(n.points(1, 0) == 0.5);
    CHECK(n.points(2, 0) == 1.0);
    CHECK(n.points(1, 1) == doctest::Approx(0.5));
    pts.col(1).setConstant(3.0);
    CHECK_THROWS_AS(normalize(DesignMatrix::from_points(pts)), DegenerateData);
  }

  TEST_CASE("GP sampling: zero normals, determinism") {
    const DesignMatrix d = lhs_sample(20, 2, 1);
    KernelSpec s;
    s.ranges = Eigen::VectorXd::Constant(2, 0.4);
    CHECK(sample_gp_from_normals(d, s, 2.0, Eigen::MatrixXd::Zero(20, 3)).values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sample_gp(d, s, 1.0, 4, 77).values == sample_gp(d, s, 1.0, 4, 77).values);
    CHECK_THROWS_AS(sample_gp(d, s, 0.0, 4, 77), InvalidParameter);
  }

  TEST_CASE("GP sampling: covariance contract") {
    // F^T F = sigma2 R: with U = I the outputs are F^T itself.
    const DesignMatrix d = lhs_sample(6, 3, 2);
    KernelSpec s;
    s.kernel = {KernelFamily::Matern52, 2.0};
    s.ranges = Eigen::Vector3d(0.5, 0.3, 0.8);
    const Eigen::MatrixXd ft = sample_gp_from_normals(d, s, 1.7, Eigen::MatrixXd::Identity(6, 6)).values;
    CHECK((ft * ft.transpose() - 1.7 * oracle::corr_matrix(s, d.points)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("GP sampling: Monte Carlo moments") {
    const DesignMatrix d = lhs_sample(5, 2, 3);
    KernelSpec s;
    s.ranges = Eigen::Vector2d(0.6, 0.9);
    const Eigen::MatrixXd y = sample_gp(d, s, 1.0, 10000, 5).values;
    const Eigen::MatrixXd emp = y * y.transpose() / 10000.0;
    const Eigen::MatrixXd r = oracle::corr_matrix(s, d.points);
    CHECK((emp - r).norm() / r.norm() < 0.05);

    DesignMatrix one;
    one.points = Eigen::MatrixXd::Constant(1, 2, 0.5);
    const Eigen::MatrixXd y1 = sample_gp(one, s, 1.0, 100000, 6).values;
    CHECK(y1.squaredNorm() / 100000.0 == doctest::Approx(1.0).epsilon(0.02));

    DesignMatrix pair;
    pair.points.resize(2, 2);
    pair.points << 0.2, 0.3, 0.5, 0.6;
    const double c = oracle::corr(s, pair.points.row(0).transpose(), pair.points.row(1).transpose());
    const Eigen::MatrixXd y2 = sample_gp(pair, s, 1.0, 100000, 7).values;
    const double emp_c = y2.row(0).dot(y2.row(1)) / std::sqrt(y2.row(0).squaredNorm() * y2.row(1).squaredNorm());
    CHECK(std::fabs(emp_c - c) < 0.02);
  }
}
