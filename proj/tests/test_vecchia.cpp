#include "oracles.hpp"
#include "vppe/error.hpp"
#include "vppe/exactgp.hpp"
#include "vppe/parallel.hpp"
#include "vppe/vecchia.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace vppe;

namespace {

struct Instance {
  Eigen::MatrixXd x, y;
  KernelSpec spec;
  TrendBasis trend;
  ConditioningPlan plan;
};

Instance random_instance(oracle::Gen& g, Eigen::Index n, Eigen::Index p, Eigen::Index k, int m) {
  Instance in;
  in.x = g.matrix(n, p);
  in.y = oracle::smooth_outputs(g, in.x, k);
  in.spec = g.spec(p, 0.1, 0.8);
  in.trend = TrendBasis{g.integer(0, 1) ? TrendKind::Constant : TrendKind::Linear};
  const DesignMatrix d = DesignMatrix::from_points(in.x);
  in.plan = build_plan(d, m, default_scale(d));
  return in;
}

ConditioningPlan identity_plan(Eigen::Index n, int m) {
  DesignMatrix d;
  d.points = Eigen::MatrixXd::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) d.points(i, 0) = static_cast<double>(i);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  return nn_condition(d, order, m, Eigen::VectorXd::Ones(1));
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

}  // namespace

TEST_SUITE("vecchia") {
  TEST_CASE("two-point closed forms") {
    // Design {0, 1}, Matern 3/2 with lambda = 1, m = 1, nu = 0.
    Eigen::MatrixXd x(2, 1), y(2, 1);
    x << 0, 1;
    y << 0, 1;
    KernelSpec s;
    s.ranges = Eigen::VectorXd::Ones(1);
    const double c = (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0));
    const ConditioningPlan plan = identity_plan(2, 1);
    const VecchiaFactors f = vecchia_factors(x, y, plan, s, TrendBasis{TrendKind::Constant});
    CHECK(f.omega[0] == 1.0);
    CHECK(f.h_tilde(0, 0) == 1.0);
    CHECK(f.g(0, 0) == 0.0);
    CHECK(f.omega[1] == doctest::Approx(1.0 - c * c).epsilon(1e-14));
    CHECK(f.h_tilde(1, 0) == doctest::Approx(1.0 - c).epsilon(1e-14));
    CHECK(f.g(1, 0) == doctest::Approx(1.0 - c * 0.0).epsilon(1e-14));
    CHECK(f.weights[0] == doctest::Approx(c).epsilon(1e-14));

    const MarginalEval e = vecchia_marginal_neg2log(f, s, no_prior());
    const double s2 = 1.0 / (1.0 - c * c) - 1.0 / (2.0 * (1.0 + c));
    CHECK(e.s2[0] == doctest::Approx(s2).epsilon(1e-13));
    const ExactEval ex = exact_marginal_neg2log(x, y, s, TrendBasis{TrendKind::Constant}, no_prior());
    CHECK(ex.s2[0] == doctest::Approx(s2).epsilon(1e-13));

    // Swapped order: g = y_i - rho y_j with the unconditioned point first.
    Eigen::MatrixXd y2(2, 1);
    y2 << 0.3, -0.8;
    const VecchiaFactors f2 = vecchia_factors(x, y2, plan, s, TrendBasis{TrendKind::Constant});
    CHECK(f2.g(1, 0) == doctest::Approx(-0.8 - c * 0.3).epsilon(1e-14));
  }

  TEST_CASE("unconditioned first point carries the nugget") {
    oracle::Gen g(2);
    Instance in = random_instance(g, 10, 2, 2, 3);
    in.spec.nugget = 0.05;
    const VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, in.trend);
    CHECK(f.omega[0] == doctest::Approx(1.05).epsilon(1e-15));
    const Eigen::Index first = in.plan.order[0];
    CHECK((f.g.row(0) - in.y.row(first)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.h_tilde.row(0) - in.trend.evaluate(in.x).row(first)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.omega.array() > 0.0).all());
    CHECK((f.omega.array() <= 1.05 + 1e-12).all());
  }

  TEST_CASE("factors agree with the explicit-inverse oracle") {
    oracle::Gen g(31);
    for (int trial = 0; trial < 25; ++trial) {
      const Eigen::Index n = g.integer(5, 60), p = g.integer(1, 4);
      Instance in = random_instance(g, n, p, g.integer(1, 3), g.integer(1, static_cast<int>(n - 1)));
      if (trial % 3 == 0) in.spec.nugget = 0.01;
      const VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, in.trend);
      const oracle::Vecchia o = oracle::vecchia(in.x, in.y, in.plan, in.spec, in.trend);
      CHECK((f.omega - o.omega).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((f.h_tilde - o.h_tilde).cwiseAbs().maxCoeff() < 1e-7);
      CHECK((f.g - o.g).cwiseAbs().maxCoeff() < 1e-7);
      const MarginalEval e = vecchia_marginal_neg2log(f, in.spec, no_prior());
      CHECK(rel(e.neg2log, o.neg2log) < 1e-8);
    }
  }

  TEST_CASE("m = n - 1 reproduces the exact marginal posterior") {
    oracle::Gen g(41);
    int ill_posed = 0;
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Index n = g.integer(5, 120), p = g.integer(1, 5);
      const Instance in = random_instance(g, n, p, g.integer(1, 3), static_cast<int>(n - 1));
      if (oracle::condition(in.spec, in.x) > oracle::kWellPosed) {
        ++ill_posed;
        continue;
      }
      const PriorSpec prior = default_jr_prior(in.x);
      const VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, in.trend);
      const MarginalEval v = vecchia_marginal_neg2log(f, in.spec, prior);
      const ExactEval e = exact_marginal_neg2log(in.x, in.y, in.spec, in.trend, prior);
      CHECK(rel(v.neg2log, e.neg2log) < 1e-8);
      CHECK(std::fabs(f.omega.array().log().sum() - e.log_det_r) < 1e-7 * std::max(1.0, std::fabs(e.log_det_r)));
      for (Eigen::Index j = 0; j < v.s2.size(); ++j) CHECK(rel(v.s2[j], e.s2[j]) < 1e-8);
      CHECK((v.mu - e.beta).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, e.beta.cwiseAbs().maxCoeff()));
    }
    CHECK(ill_posed <= 10);
  }

  TEST_CASE("refinement in m approaches the exact value") {
    oracle::Gen g(7);
    const Instance base = random_instance(g, 90, 3, 1, 5);
    const DesignMatrix d = DesignMatrix::from_points(base.x);
    const double exact = exact_marginal_neg2log(base.x, base.y, base.spec, base.trend, no_prior()).neg2log;
    std::vector<double> gaps;
    for (int m : {5, 10, 20, 89}) {
      const VecchiaModel vm(base.x, base.y, build_plan(d, m, default_scale(d)), base.trend);
      gaps.push_back(std::fabs(vm.evaluate(base.spec, no_prior()).neg2log - exact));
    }
    CHECK(gaps[3] < 1e-8 * std::fabs(exact));
    CHECK(gaps[2] <= gaps[0]);
  }

  TEST_CASE("identical output columns have identical S^2") {
    oracle::Gen g(12);
    Instance in = random_instance(g, 40, 2, 1, 8);
    Eigen::MatrixXd y2(40, 2);
    y2 << in.y, in.y;
    const MarginalEval e = vecchia_marginal_neg2log(vecchia_factors(in.x, y2, in.plan, in.spec, in.trend), in.spec, no_prior());
    CHECK(e.s2[0] == e.s2[1]);
  }

  TEST_CASE("S^2 and Sigma are invariant to the sign of h-tilde") {
    oracle::Gen g(13);
    const Instance in = random_instance(g, 50, 3, 2, 6);
    VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, in.trend);
    const MarginalEval a = vecchia_marginal_neg2log(f, in.spec, no_prior());
    f.h_tilde = -f.h_tilde;
    const MarginalEval b = vecchia_marginal_neg2log(f, in.spec, no_prior());
    CHECK((a.s2 - b.s2).cwiseAbs().maxCoeff() <= 1e-12 * a.s2.cwiseAbs().maxCoeff());
    CHECK((a.sigma_tilde - b.sigma_tilde).cwiseAbs().maxCoeff() <= 1e-12 * a.sigma_tilde.cwiseAbs().maxCoeff());
  }

  TEST_CASE("fused evaluation matches the factor path bitwise") {
    oracle::Gen g(14);
    const Instance in = random_instance(g, 300, 3, 2, 10);
    const PriorSpec prior = default_jr_prior(in.x);
    const VecchiaModel vm(in.x, in.y, in.plan, in.trend);
    const MarginalEval fused = vm.evaluate(in.spec, prior, GradientMode::Ranges);
    const MarginalEval stored = vecchia_marginal_neg2log(vm.factors(in.spec), in.spec, prior);
    CHECK(fused.neg2log == stored.neg2log);
    CHECK(vm.evaluate(in.spec, prior).neg2log == stored.neg2log);
  }

  TEST_CASE("per-point results do not depend on the thread count") {
    oracle::Gen g(15);
    const Instance in = random_instance(g, 700, 4, 3, 12);
    const VecchiaModel vm(in.x, in.y, in.plan, in.trend);
    set_thread_count(1);
    const VecchiaFactors a = vm.factors(in.spec);
    const MarginalEval ea = vm.evaluate(in.spec, no_prior(), GradientMode::Ranges);
    set_thread_count(4);
    const VecchiaFactors b = vm.factors(in.spec);
    const MarginalEval eb = vm.evaluate(in.spec, no_prior(), GradientMode::Ranges);
    set_thread_count(0);
    CHECK(std::memcmp(a.omega.data(), b.omega.data(), sizeof(double) * static_cast<std::size_t>(a.omega.size())) == 0);
    CHECK(a.g == b.g);
    CHECK(a.h_tilde == b.h_tilde);
    CHECK(ea.neg2log == eb.neg2log);
    CHECK(ea.grad == eb.grad);
  }

  TEST_CASE("gradient matches central differences (randomized)") {
    oracle::Gen g(16);
    double worst = 0.0;
    int ill_posed = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const Eigen::Index n = g.integer(6, 80), p = g.integer(1, 4);
      const int choices[3] = {3, 10, static_cast<int>(n - 1)};
      const int m = std::min(choices[trial % 3], static_cast<int>(n - 1));
      Instance in = random_instance(g, n, p, g.integer(1, 3), m);
      const bool nugget = trial % 4 == 0;
      if (oracle::condition(in.spec, in.x) > oracle::kWellPosed) {
        ++ill_posed;
        continue;
      }
      if (nugget) in.spec.nugget = 0.02;
      PriorSpec prior = default_jr_prior(in.x);
      prior.include_nugget = nugget;
      const VecchiaModel vm(in.x, in.y, in.plan, in.trend);
      const GradientMode mode = nugget ? GradientMode::RangesAndNugget : GradientMode::Ranges;
      const Eigen::VectorXd grad = vm.evaluate(in.spec, prior, mode).grad;
      Eigen::VectorXd fd(grad.size());
      for (Eigen::Index j = 0; j < grad.size(); ++j) {
        const auto f = [&](double t) {
          KernelSpec at = in.spec;
          (j < p ? at.ranges[j] : at.nugget) = t;
          return vm.evaluate(at, prior).neg2log;
        };
        const double base = j < p ? in.spec.ranges[j] : in.spec.nugget;
        fd[j] = oracle::central_diff(f, base, oracle::kFdStep * base);
      }
      worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
    }
    MESSAGE("worst normwise relative gradient error: " << worst << ", ill-posed draws skipped: " << ill_posed);
    CHECK(worst < 1e-5);
    CHECK(ill_posed <= 10);
  }

  TEST_CASE("symmetric design gives equal gradient components") {
    oracle::Gen g(17);
    Eigen::MatrixXd half = g.matrix(15, 2);
    Eigen::MatrixXd x(30, 2);
    x.topRows(15) = half;
    x.bottomRows(15).col(0) = half.col(1);
    x.bottomRows(15).col(1) = half.col(0);
    Eigen::MatrixXd y(30, 1);
    for (Eigen::Index i = 0; i < 30; ++i) y(i, 0) = std::cos(3 * x(i, 0)) + std::cos(3 * x(i, 1));
    KernelSpec s;
    s.ranges = Eigen::Vector2d(0.3, 0.3);
    const ConditioningPlan plan = build_plan(DesignMatrix::from_points(x), 29, Eigen::Vector2d(1, 1));
    const Eigen::VectorXd gr = vecchia_marginal_grad(x, y, plan, s, TrendBasis{TrendKind::Constant}, no_prior());
    CHECK(gr[0] == doctest::Approx(gr[1]).epsilon(1e-8));
  }

  TEST_CASE("profiled identity n sigma_m^2 = S^2") {
    oracle::Gen g(18);
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Index n = g.integer(5, 100);
      const Instance in = random_instance(g, n, g.integer(1, 4), 1, g.integer(1, static_cast<int>(n - 1)));
      const VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, in.trend);
      const ProfiledEval pe = profiled_neg2log(f);
      const MarginalEval e = vecchia_marginal_neg2log(f, in.spec, no_prior());
      CHECK(rel(static_cast<double>(n) * pe.sigma2, e.s2[0]) < 1e-10);
      CHECK(pe.value == doctest::Approx(static_cast<double>(n) * pe.sigma2 + f.omega.array().log().sum()));
    }
  }

  TEST_CASE("profiled edge cases") {
    Eigen::MatrixXd x(1, 1), y(1, 1);
    x << 0.5;
    y << -1.7;
    KernelSpec s;
    s.ranges = Eigen::VectorXd::Constant(1, 0.3);
    DesignMatrix d = DesignMatrix::from_points(x);
    ConditioningPlan plan;
    plan.order = {0};
    plan.offsets = {0, 0};
    plan.m = 1;
    plan.scale = Eigen::VectorXd::Ones(1);
    const VecchiaFactors f = vecchia_factors(x, y, plan, s, TrendBasis{TrendKind::None});
    CHECK(profiled_neg2log(f).sigma2 == doctest::Approx(1.7 * 1.7).epsilon(1e-15));

    oracle::Gen g(19);
    const Instance in = random_instance(g, 40, 2, 1, 39);
    const VecchiaFactors f2 = vecchia_factors(in.x, in.y, in.plan, in.spec, TrendBasis{TrendKind::None});
    const ExactEval ex = exact_marginal_neg2log(in.x, in.y, in.spec, TrendBasis{TrendKind::None}, no_prior());
    CHECK(rel(40.0 * profiled_neg2log(f2).sigma2, ex.s2[0]) < 1e-9);

    Eigen::MatrixXd y2(40, 2);
    y2 << in.y, in.y;
    CHECK_THROWS_AS(profiled_neg2log(vecchia_factors(in.x, y2, in.plan, in.spec, in.trend)), InvalidParameter);
  }

  TEST_CASE("degenerate data is reported") {
    oracle::Gen g(20);
    Instance in = random_instance(g, 20, 2, 1, 5);
    in.y.setConstant(3.0);  // inside the constant trend span
    const VecchiaFactors f = vecchia_factors(in.x, in.y, in.plan, in.spec, TrendBasis{TrendKind::Constant});
    CHECK_THROWS_AS(vecchia_marginal_neg2log(f, in.spec, no_prior()), DegenerateData);
  }
}
