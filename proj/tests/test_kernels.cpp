#include "oracles.hpp"
#include "vppe/error.hpp"
#include "vppe/kernels.hpp"

#include <doctest.h>

#include <cmath>

using namespace vppe;

namespace {

const Kernel kM32{KernelFamily::Matern32, 2.0};
const Kernel kM52{KernelFamily::Matern52, 2.0};

KernelSpec make(Kernel k, std::initializer_list<double> ranges) {
  KernelSpec s;
  s.kernel = k;
  s.ranges.resize(static_cast<Eigen::Index>(ranges.size()));
  Eigen::Index i = 0;
  for (double r : ranges) s.ranges[i++] = r;
  return s;
}

Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("one-dimensional closed forms") {
    CHECK(corr_1d(kM32, 0.0, 1.0) == 1.0);
    CHECK(corr_1d(kM32, 1.0, std::sqrt(3.0)) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(corr_1d(kM32, 1.0, std::sqrt(3.0)) == doctest::Approx(0.735759).epsilon(1e-6));
    CHECK(corr_1d({KernelFamily::PowerExponential, 2.0}, 1.0, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK(corr_1d(kM52, 1.0, std::sqrt(5.0)) == doctest::Approx((7.0 / 3.0) * std::exp(-1.0)).epsilon(1e-14));
    CHECK(corr_1d(kM52, 1.0, std::sqrt(5.0)) == doctest::Approx(7.0 / 3.0 * std::exp(-1.0)).epsilon(1e-14));
  }

  TEST_CASE("nonpositive range is rejected") {
    CHECK_THROWS_AS(corr_1d(kM32, 1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(corr_1d(kM32, 1.0, -1.0), InvalidParameter);
    KernelSpec s = make(kM32, {1.0, -2.0});
    CHECK_THROWS_AS(s.validate(), InvalidParameter);
    s = make({KernelFamily::PowerExponential, 2.5}, {1.0});
    CHECK_THROWS_AS(s.validate(), InvalidParameter);
    s = make(kM32, {1.0});
    s.nugget = -1e-3;
    CHECK_THROWS_AS(s.validate(), InvalidParameter);
  }

  TEST_CASE("product correlation") {
    const KernelSpec s = make(kM32, {std::sqrt(3.0), std::sqrt(3.0)});
    CHECK(corr_product(s, v({0, 0}), v({1, 1})) == doctest::Approx(std::pow(2.0 * std::exp(-1.0), 2)).epsilon(1e-14));
    CHECK(corr_product(s, v({0, 0}), v({1, 1})) == doctest::Approx(0.541341).epsilon(1e-6));
    CHECK(corr_product(s, v({0.3, 0.7}), v({0.3, 0.7})) == 1.0);
    CHECK(corr_product(s, v({0.1, 0.9}), v({0.4, 0.2})) == corr_product(s, v({0.4, 0.2}), v({0.1, 0.9})));
    CHECK_THROWS_AS(corr_product(s, v({0.0}), v({1.0, 1.0})), ShapeError);
  }

  TEST_CASE("hand-differentiated Matern 3/2 derivative") {
    const KernelSpec s = make(kM32, {std::sqrt(3.0)});
    const CorrDerivs d = corr_product_grad(s, v({0.0}), v({1.0}));
    CHECK(d.d_dlambda[0] == doctest::Approx(std::exp(-1.0) / std::sqrt(3.0)).epsilon(1e-13));
    CHECK(d.d_dlambda[0] == doctest::Approx(0.212395).epsilon(1e-5));
  }

  TEST_CASE("zero distance has zero derivatives") {
    for (const Kernel k : {kM32, kM52, Kernel{KernelFamily::PowerExponential, 1.3}}) {
      const KernelSpec s = make(k, {0.4, 0.9});
      const CorrDerivs d = corr_product_grad(s, v({0.2, 0.5}), v({0.2, 0.5}));
      CHECK(d.value == 1.0);
      CHECK(d.d_dlambda.cwiseAbs().maxCoeff() == 0.0);
      CHECK(corr_1d_dlambda(k, 0.0, 0.7) == 0.0);
    }
  }

  TEST_CASE("analytic gradient matches central differences (randomized)") {
    oracle::Gen g(11);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
      const Eigen::Index p = g.integer(1, 5);
      const KernelSpec s = g.spec(p, 0.05, 2.0);
      const Eigen::VectorXd a = g.matrix(p, 1).col(0), b = g.matrix(p, 1).col(0);
      const CorrDerivs d = corr_product_grad(s, a, b);
      CHECK(d.value == doctest::Approx(oracle::corr(s, a, b)).epsilon(1e-13));
      for (Eigen::Index l = 0; l < p; ++l) {
        const double h = 1e-6 * s.ranges[l];
        KernelSpec up = s, dn = s;
        up.ranges[l] += h;
        dn.ranges[l] -= h;
        const double fd = (corr_product(up, a, b) - corr_product(dn, a, b)) / (2.0 * h);
        const double scale = std::max(std::fabs(fd), 1e-3 * d.value / s.ranges[l]);
        worst = std::max(worst, std::fabs(d.d_dlambda[l] - fd) / scale);
      }
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("monotone in distance, vanishing far away") {
    for (const Kernel k : {kM32, kM52, Kernel{KernelFamily::PowerExponential, 1.0}, Kernel{KernelFamily::PowerExponential, 2.0}}) {
      double prev = 1.0;
      for (int i = 1; i <= 200; ++i) {
        const double c = corr_1d(k, 0.05 * i, 0.6);
        CHECK(c <= prev);
        CHECK(c >= 0.0);
        prev = c;
      }
      CHECK(corr_1d(k, 1e4, 0.6) < 1e-100);
    }
  }

  TEST_CASE("correlation matrix agrees with the direct formula") {
    oracle::Gen g(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index p = g.integer(1, 6), n = g.integer(1, 40);
      KernelSpec s = g.spec(p);
      s.nugget = trial % 3 == 0 ? 0.01 : 0.0;
      const Eigen::MatrixXd x = g.matrix(n, p);
      const Eigen::MatrixXd r = correlation_matrix(s, x);
      CHECK((r - oracle::corr_matrix(s, x)).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK((r.diagonal().array() == 1.0 + s.nugget).all());
      const Eigen::MatrixXd xb = g.matrix(7, p);
      const Eigen::MatrixXd cross = cross_correlation(s, x, xb);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < 7; ++j)
          CHECK(cross(i, j) == doctest::Approx(oracle::corr(s, x.row(i).transpose(), xb.row(j).transpose())).epsilon(1e-13));
    }
  }

  TEST_CASE("kernel names round trip") {
    CHECK(parse_kernel("matern32").family == KernelFamily::Matern32);
    CHECK(parse_kernel("matern52").family == KernelFamily::Matern52);
    const Kernel pe = parse_kernel("pow_exp:1.5");
    CHECK(pe.family == KernelFamily::PowerExponential);
    CHECK(pe.alpha == 1.5);
    CHECK(parse_kernel(to_string(pe)).alpha == 1.5);
    CHECK(to_string(kM52) == "matern52");
    CHECK_THROWS_AS(parse_kernel("gauss"), InvalidParameter);
    CHECK_THROWS_AS(parse_kernel("pow_exp:3"), InvalidParameter);
    CHECK_THROWS_AS(parse_kernel("pow_exp:x"), InvalidParameter);
  }
}
