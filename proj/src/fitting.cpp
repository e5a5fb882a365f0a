#include "vppe/fitting.hpp"

#include "vppe/error.hpp"
#include "vppe/exactgp.hpp"
#include "vppe/vecchia.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace vppe {
namespace {

// Optimizer coordinates: xi_l = -log lambda_l, then log nu^2 when estimated.
struct Parameterization {
  Eigen::Index p = 0;
  bool nugget = false;
  double fixed_nugget = 0.0;
  Kernel kernel;

  [[nodiscard]] KernelSpec spec(const Eigen::VectorXd& theta) const {
    KernelSpec s;
    s.kernel = kernel;
    s.ranges = (-theta.head(p)).array().exp();
    s.nugget = nugget ? std::exp(theta[p]) : fixed_nugget;
    return s;
  }

  [[nodiscard]] Eigen::VectorXd theta(const Eigen::VectorXd& ranges, double nu2) const {
    Eigen::VectorXd t(p + (nugget ? 1 : 0));
    t.head(p) = -ranges.array().log();
    if (nugget) t[p] = std::log(nu2);
    return t;
  }

  [[nodiscard]] GradientMode mode() const { return nugget ? GradientMode::RangesAndNugget : GradientMode::Ranges; }

  // Chain rule from (lambda, nu^2) to theta.
  [[nodiscard]] Eigen::VectorXd to_theta_grad(const KernelSpec& s, const Eigen::VectorXd& g) const {
    Eigen::VectorXd out(g.size());
    out.head(p) = -s.ranges.cwiseProduct(g.head(p));
    if (nugget) out[p] = s.nugget * g[p];
    return out;
  }
};

void record(FitDiagnostics& diag, int round, const OptResult& res, const Parameterization& par) {
  for (const OptState& st : res.runs) {
    SeedReport r;
    r.round = round;
    const KernelSpec a = par.spec(st.start);
    const KernelSpec b = par.spec(st.x);
    r.start_ranges = a.ranges;
    r.end_ranges = b.ranges;
    r.start_nugget = a.nugget;
    r.end_nugget = b.nugget;
    r.objective = st.value;
    r.iterations = st.iterations;
    r.evaluations = st.evaluations;
    r.converged = st.converged;
    r.skipped = st.skipped;
    r.status = st.status;
    diag.seeds.push_back(std::move(r));
  }
}

std::string describe(const FitDiagnostics& diag) {
  std::ostringstream os;
  for (const SeedReport& r : diag.seeds) {
    os << "\n  round " << r.round << ": " << (r.skipped ? "skipped" : r.converged ? "converged" : "not converged")
       << ", objective " << r.objective << ", " << r.iterations << " iterations (" << r.status << ")";
  }
  return os.str();
}

}  // namespace

std::string to_string(FitMethod method) { return method == FitMethod::Exact ? "exact" : "vecchia"; }

FitMethod parse_method(std::string_view name) {
  if (name == "vecchia") return FitMethod::Vecchia;
  if (name == "exact") return FitMethod::Exact;
  throw InvalidParameter("unknown method '" + std::string(name) + "' (expected vecchia or exact)");
}

std::vector<Eigen::Index> subsample_outputs(Eigen::Index k, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidParameter("output fraction must lie in (0, 1]");
  if (k <= 0) throw InvalidParameter("no output columns to sample");
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(k));
  std::iota(cols.begin(), cols.end(), Eigen::Index{0});
  if (fraction == 1.0) return cols;
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(k)));
  if (count == 0) throw InvalidParameter("output fraction selects no columns");
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` entries form a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cols.size() - 1);
    std::swap(cols[i], cols[pick(rng)]);
  }
  cols.resize(count);
  std::sort(cols.begin(), cols.end());
  return cols;
}

FittedEmulator fit(const DesignMatrix& design, const OutputMatrix& outputs, Kernel kernel, TrendBasis trend,
                   const FitOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.dims();
  const Eigen::Index k = outputs.outputs();
  if (outputs.rows() != n) throw ShapeError("output rows do not match design rows");
  if (k == 0 || p == 0) throw ShapeError("design and outputs must have at least one column");
  if (!outputs.values.allFinite()) throw ShapeError("outputs contain non-finite entries");
  const Eigen::Index q = trend.size(p);
  if (n <= q) throw DegenerateData("need more training points than trend coefficients (n > q)");
  if (options.method == FitMethod::Vecchia && (options.m < 1 || options.m >= n)) {
    throw InvalidParameter("conditioning size m must satisfy 1 <= m <= n - 1");
  }
  if (options.scaling_rounds < 1) throw InvalidParameter("need at least one scaling round");
  if (!(options.nugget >= 0.0)) throw InvalidParameter("nugget must be nonnegative");
  if (options.estimate_nugget && !(options.nugget > 0.0)) {
    throw InvalidParameter("an estimated nugget needs a positive starting value");
  }

  const DesignMatrix xn = design.normalized ? design : normalize(design);
  xn.validate();

  FittedEmulator model;
  model.trend = trend;
  model.method = options.method;
  model.m = options.method == FitMethod::Vecchia ? options.m : 0;
  model.lower = design.normalized ? Eigen::VectorXd::Zero(p) : design.lower;
  model.upper = design.normalized ? Eigen::VectorXd::Ones(p) : design.upper;
  model.dof = n - q;
  model.nugget_estimated = options.estimate_nugget;
  model.data = std::make_shared<const TrainingData>(TrainingData{xn.points, outputs.values});

  Eigen::VectorXd c(p);
  for (Eigen::Index l = 0; l < p; ++l) c[l] = mean_pairwise_abs_diff(xn.points.col(l));
  if (options.prior == PriorKind::JointlyRobust) {
    model.prior = default_jr_prior(xn.points, options.prior_a);
  } else {
    model.prior.kind = PriorKind::None;
  }
  model.prior.include_nugget = options.estimate_nugget && options.prior == PriorKind::JointlyRobust;

  const std::vector<Eigen::Index> cols = subsample_outputs(k, options.output_fraction, options.output_seed);
  const Eigen::MatrixXd y_fit = outputs.values(Eigen::all, cols);
  model.diagnostics.range_outputs = static_cast<Eigen::Index>(cols.size());

  Parameterization par{p, options.estimate_nugget, options.nugget, kernel};
  const std::vector<Eigen::VectorXd> seeds = {par.theta(options.small_seed_factor * c, options.nugget),
                                              par.theta(options.large_seed_factor * c, options.nugget)};
  OptResult best;
  if (options.method == FitMethod::Exact) {
    const ObjectiveFn objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
      const KernelSpec s = par.spec(theta);
      const ExactEval e =
          exact_marginal_neg2log(xn.points, y_fit, s, trend, model.prior, grad ? par.mode() : GradientMode::None);
      if (grad) *grad = par.to_theta_grad(s, e.grad);
      return e.neg2log;
    };
    best = optimize(objective, seeds, options.optimizer);
    record(model.diagnostics, 1, best, par);
  } else {
    Eigen::VectorXd scale = default_scale(xn);
    for (int round = 1; round <= options.scaling_rounds; ++round) {
      const VecchiaModel vm(xn.points, y_fit, build_plan(xn, options.m, scale, options.ordering_seed), trend);
      const ObjectiveFn objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
        const KernelSpec s = par.spec(theta);
        const MarginalEval e = vm.evaluate(s, model.prior, grad ? par.mode() : GradientMode::None);
        if (grad) *grad = par.to_theta_grad(s, e.grad);
        return e.neg2log;
      };
      best = optimize(objective, round == 1 ? seeds : std::vector<Eigen::VectorXd>{best.best.x}, options.optimizer);
      record(model.diagnostics, round, best, par);
      scale = par.spec(best.best.x).ranges;
      model.plan = vm.plan();
    }
  }

  const bool any_converged = std::any_of(model.diagnostics.seeds.begin(), model.diagnostics.seeds.end(),
                                         [](const SeedReport& r) { return r.converged; });
  if (options.require_convergence && !any_converged) {
    throw FitError("range optimization did not converge from any seed:" + describe(model.diagnostics));
  }

  model.spec = par.spec(best.best.x);
  model.diagnostics.objective = best.best.value;

  if (options.method == FitMethod::Exact || n <= options.exact_threshold) {
    const ExactEval e = exact_marginal_neg2log(xn.points, outputs.values, model.spec, trend, no_prior());
    model.beta = e.beta;
    model.sigma2 = e.s2 / static_cast<double>(n - q);
  } else {
    const VecchiaModel vm(xn.points, outputs.values, *model.plan, trend);
    const MarginalEval e = vm.evaluate(model.spec, no_prior());
    model.beta = e.mu;
    model.sigma2 = e.s2 / static_cast<double>(n - q);
    model.diagnostics.beta_from_vecchia = true;
  }
  model.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

}  // namespace vppe
