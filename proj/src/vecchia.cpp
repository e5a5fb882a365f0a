#include "vppe/vecchia.hpp"

#include "vppe/error.hpp"
#include "vppe/linalg.hpp"
#include "vppe/parallel.hpp"
#include "vppe/simd/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vppe {
namespace {

// Points per reduction block. Fixed so sums do not depend on the thread count.
constexpr Eigen::Index kBlock = 128;

Eigen::Index gradient_count(GradientMode mode, Eigen::Index p) {
  switch (mode) {
    case GradientMode::None:
      return 0;
    case GradientMode::Ranges:
      return p;
    case GradientMode::RangesAndNugget:
      return p + 1;
  }
  return 0;
}

struct Accumulator {
  double sum_log_omega = 0.0;
  double max_jitter = 0.0;
  Eigen::MatrixXd sigma;  // q x q
  Eigen::MatrixXd u;      // q x k
  Eigen::VectorXd c;      // k
  Eigen::VectorXd dlog_omega;
  std::vector<Eigen::MatrixXd> dsigma;
  std::vector<Eigen::MatrixXd> du;
  Eigen::MatrixXd dc;  // k x P

  Accumulator(Eigen::Index q, Eigen::Index k, Eigen::Index params)
      : sigma(Eigen::MatrixXd::Zero(q, q)),
        u(Eigen::MatrixXd::Zero(q, k)),
        c(Eigen::VectorXd::Zero(k)),
        dlog_omega(Eigen::VectorXd::Zero(params)),
        dsigma(static_cast<std::size_t>(params), Eigen::MatrixXd::Zero(q, q)),
        du(static_cast<std::size_t>(params), Eigen::MatrixXd::Zero(q, k)),
        dc(Eigen::MatrixXd::Zero(k, params)) {}

  void add_point(double omega, const Eigen::VectorXd& h, const Eigen::VectorXd& g) {
    const double inv = 1.0 / omega;
    sum_log_omega += std::log(omega);
    sigma.noalias() += (inv * h) * h.transpose();
    u.noalias() += (inv * h) * g.transpose();
    c.array() += inv * g.array().square();
  }

  void add_point_derivative(Eigen::Index j, double omega, double omega_dot, const Eigen::VectorXd& h,
                            const Eigen::VectorXd& g, const Eigen::VectorXd& h_dot,
                            const Eigen::VectorXd& g_dot) {
    const double inv = 1.0 / omega;
    const double rel = omega_dot * inv;
    const auto ju = static_cast<std::size_t>(j);
    dlog_omega[j] += rel;
    dsigma[ju].noalias() += (inv * h_dot) * h.transpose();
    dsigma[ju].noalias() += (inv * h) * h_dot.transpose();
    dsigma[ju].noalias() -= (inv * rel * h) * h.transpose();
    du[ju].noalias() += (inv * h_dot) * g.transpose();
    du[ju].noalias() += (inv * h) * g_dot.transpose();
    du[ju].noalias() -= (inv * rel * h) * g.transpose();
    dc.col(j).array() += inv * (2.0 * g.array() * g_dot.array() - rel * g.array().square());
  }

  void merge(const Accumulator& other) {
    sum_log_omega += other.sum_log_omega;
    max_jitter = std::max(max_jitter, other.max_jitter);
    sigma += other.sigma;
    u += other.u;
    c += other.c;
    dlog_omega += other.dlog_omega;
    for (std::size_t j = 0; j < dsigma.size(); ++j) {
      dsigma[j] += other.dsigma[j];
      du[j] += other.du[j];
    }
    dc += other.dc;
  }
};

// Workspace and results for one conditional density p(y_i | y_b(i)).
class PointSolver {
 public:
  PointSolver(const Eigen::MatrixXd& x, const RowMatrix& y, const RowMatrix& h, const KernelSpec& spec,
              Eigen::Index params, Eigen::Index max_neighbours)
      : x_(x), y_(y), h_(h), spec_(spec), params_(params) {
    const Eigen::Index cap = 1 + std::min(max_neighbours, std::max<Eigen::Index>(x.rows() - 1, 0));
    const Eigen::Index p = x.cols();
    g_mat_.resize(cap, cap);
    scratch_.resize(cap, cap);
    loc_.resize(cap, p);
    ratio_.resize(cap, p);
    corr_.resize(cap);
    anchor_.resize(p);
    inv_range_ = spec.ranges.cwiseInverse();
    params_corr_ = simd::CorrParams{spec.kernel.family, spec.kernel.alpha,
                                    std::span<const double>(inv_range_.data(), static_cast<std::size_t>(p))};
    ratio_ptrs_.resize(static_cast<std::size_t>(p));
    loc_ptrs_.resize(static_cast<std::size_t>(p));
    dg_.assign(static_cast<std::size_t>(std::min<Eigen::Index>(params, p)), Eigen::MatrixXd(cap, cap));
    h_tilde.resize(h.cols());
    g.resize(y.cols());
    omega_dot.resize(params);
    h_dot.resize(h.cols(), params);
    g_dot.resize(y.cols(), params);
  }

  // Fills omega, w, h_tilde, g and, when params > 0, their derivatives.
  void solve(Eigen::Index i, std::span<const Eigen::Index> nb) {
    const auto s = static_cast<Eigen::Index>(nb.size());
    const Eigen::Index p = x_.cols();
    const bool want_grad = params_ > 0;
    const Eigen::Index range_params = static_cast<Eigen::Index>(dg_.size());

    // Local ordering: neighbours first, then the point itself.
    for (Eigen::Index a = 0; a < s; ++a) loc_.row(a) = x_.row(nb[static_cast<std::size_t>(a)]);
    loc_.row(s) = x_.row(i);
    for (Eigen::Index l = 0; l < p; ++l) {
      loc_ptrs_[static_cast<std::size_t>(l)] = loc_.col(l).data();
      ratio_ptrs_[static_cast<std::size_t>(l)] = ratio_.col(l).data();
    }
    const auto& table = simd::active();
    const double diag = 1.0 + spec_.nugget;
    auto gm = g_mat_.topLeftCorner(s + 1, s + 1);
    for (Eigen::Index a = 0; a <= s; ++a) {
      gm(a, a) = diag;
      if (a == 0) continue;
      anchor_ = loc_.row(a).transpose();
      table.corr_row(params_corr_, anchor_.data(), loc_ptrs_, static_cast<std::size_t>(a), corr_.data(),
                     want_grad ? std::span<double* const>(ratio_ptrs_) : std::span<double* const>());
      for (Eigen::Index b = 0; b < a; ++b) gm(a, b) = corr_[b];
      for (Eigen::Index j = 0; j < range_params; ++j) {
        auto& d = dg_[static_cast<std::size_t>(j)];
        for (Eigen::Index b = 0; b < a; ++b) d(a, b) = corr_[b] * ratio_(b, j);
      }
    }

    jitter = cholesky_in_place_with_jitter(gm, scratch_.topLeftCorner(s + 1, s + 1));
    if (jitter < 0.0) {
      throw ConditioningError("Vecchia conditioning matrix at ordered position " + std::to_string(i) +
                              " is not positive definite after jitter up to 1e-6");
    }
    const double last = gm(s, s);
    omega = last * last;
    const auto ln = gm.topLeftCorner(s, s).triangularView<Eigen::Lower>();
    w = gm.row(s).head(s).transpose();
    ln.transpose().solveInPlace(w);

    h_tilde = h_.row(i).transpose();
    g = y_.row(i).transpose();
    for (Eigen::Index a = 0; a < s; ++a) {
      const Eigen::Index r = nb[static_cast<std::size_t>(a)];
      h_tilde.noalias() -= w[a] * h_.row(r).transpose();
      g.noalias() -= w[a] * y_.row(r).transpose();
    }
    if (!want_grad) return;

    for (Eigen::Index j = 0; j < params_; ++j) {
      double od = 0.0;
      if (j < range_params) {
        const auto& d = dg_[static_cast<std::size_t>(j)];
        const Eigen::VectorXd r_dot = d.row(s).head(s).transpose();
        // v = r_dot - K_dot w, with K_dot symmetric and a zero diagonal.
        v = r_dot;
        for (Eigen::Index a = 0; a < s; ++a) {
          for (Eigen::Index b = 0; b < a; ++b) {
            v[a] -= d(a, b) * w[b];
            v[b] -= d(a, b) * w[a];
          }
        }
        od = -r_dot.dot(w) - w.dot(v);
      } else {
        v = -w;
        od = 1.0 - w.dot(v);
      }
      omega_dot[j] = od;
      w_dot = v;
      ln.solveInPlace(w_dot);
      ln.transpose().solveInPlace(w_dot);
      h_dot.col(j).setZero();
      g_dot.col(j).setZero();
      for (Eigen::Index a = 0; a < s; ++a) {
        const Eigen::Index r = nb[static_cast<std::size_t>(a)];
        h_dot.col(j).noalias() -= w_dot[a] * h_.row(r).transpose();
        g_dot.col(j).noalias() -= w_dot[a] * y_.row(r).transpose();
      }
    }
  }

  double omega = 1.0;
  double jitter = 0.0;
  Eigen::VectorXd w;
  Eigen::VectorXd h_tilde;
  Eigen::VectorXd g;
  Eigen::VectorXd omega_dot;
  Eigen::MatrixXd h_dot;
  Eigen::MatrixXd g_dot;

 private:
  const Eigen::MatrixXd& x_;
  const RowMatrix& y_;
  const RowMatrix& h_;
  const KernelSpec& spec_;
  Eigen::Index params_;
  Eigen::VectorXd inv_range_;
  simd::CorrParams params_corr_;
  Eigen::MatrixXd g_mat_, scratch_, loc_, ratio_;
  Eigen::VectorXd corr_, anchor_, v, w_dot;
  std::vector<const double*> loc_ptrs_;
  std::vector<double*> ratio_ptrs_;
  std::vector<Eigen::MatrixXd> dg_;
};

MarginalEval finalize(const Accumulator& acc, Eigen::Index n, Eigen::Index q, Eigen::Index k,
                      Eigen::Index params, const KernelSpec& spec, const PriorSpec& prior, GradientMode mode) {
  if (n <= q) throw DegenerateData("need more training points than trend coefficients (n > q)");
  MarginalEval out;
  out.sum_log_omega = acc.sum_log_omega;
  out.max_jitter = acc.max_jitter;
  out.sigma_tilde = acc.sigma;

  Eigen::LLT<Eigen::MatrixXd> sigma_llt;
  if (q > 0) {
    sigma_llt.compute(acc.sigma);
    if (sigma_llt.info() != Eigen::Success || !(sigma_llt.matrixLLT().diagonal().array() > 0.0).all()) {
      throw DegenerateData("trend information matrix is singular");
    }
    out.log_det_sigma = 2.0 * sigma_llt.matrixLLT().diagonal().array().log().sum();
    out.mu = sigma_llt.solve(acc.u);
    out.s2 = acc.c - (acc.u.array() * out.mu.array()).colwise().sum().transpose().matrix();
  } else {
    out.mu.resize(0, k);
    out.s2 = acc.c;
  }
  constexpr double kFloor = 64.0 * std::numeric_limits<double>::epsilon();
  for (Eigen::Index l = 0; l < k; ++l) {
    if (!std::isfinite(out.s2[l]) || out.s2[l] <= kFloor * acc.c[l]) {
      throw DegenerateData("quadratic form S^2 is not positive for output column " + std::to_string(l + 1));
    }
  }

  const PriorValue pv = prior_term(spec, prior, mode);
  const auto nq = static_cast<double>(n - q);
  const auto kd = static_cast<double>(k);
  out.log_prior_term = pv.value;
  out.neg2log = nq * out.s2.array().log().sum() + kd * acc.sum_log_omega + kd * out.log_det_sigma + pv.value;

  if (params > 0) {
    out.grad.resize(params);
    for (Eigen::Index j = 0; j < params; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      Eigen::VectorXd s_dot = acc.dc.col(j);
      double trace = 0.0;
      if (q > 0) {
        s_dot -= 2.0 * (out.mu.array() * acc.du[ju].array()).colwise().sum().transpose().matrix();
        s_dot += (out.mu.array() * (acc.dsigma[ju] * out.mu).array()).colwise().sum().transpose().matrix();
        trace = sigma_llt.solve(acc.dsigma[ju]).trace();
      }
      out.grad[j] = nq * (s_dot.array() / out.s2.array()).sum() + kd * acc.dlog_omega[j] + kd * trace + pv.grad[j];
    }
  }
  return out;
}

std::size_t block_count(Eigen::Index n) { return static_cast<std::size_t>((n + kBlock - 1) / kBlock); }

}  // namespace

PriorValue prior_term(const KernelSpec& spec, const PriorSpec& prior, GradientMode mode) {
  const Eigen::Index p = spec.dims();
  PriorValue pv = jr_prior_neg2log(spec.ranges, prior,
                                   prior.include_nugget ? std::optional<double>(spec.nugget) : std::nullopt);
  const Eigen::Index want = gradient_count(mode, p);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(want);
  const Eigen::Index have = std::min<Eigen::Index>(want, pv.grad.size());
  grad.head(have) = pv.grad.head(have);
  pv.grad = std::move(grad);
  return pv;
}

VecchiaModel::VecchiaModel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, ConditioningPlan plan,
                           TrendBasis trend)
    : plan_(std::move(plan)) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n) throw ShapeError("output rows do not match design rows");
  if (plan_.size() != n || static_cast<Eigen::Index>(plan_.offsets.size()) != n + 1) {
    throw ShapeError("conditioning plan does not match the design");
  }
  const Eigen::MatrixXd h = trend.evaluate(x);
  x_.resize(n, x.cols());
  y_.resize(n, y.cols());
  h_.resize(n, h.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = plan_.order[static_cast<std::size_t>(i)];
    if (src < 0 || src >= n) throw ShapeError("conditioning plan order is not a permutation");
    x_.row(i) = x.row(src);
    y_.row(i) = y.row(src);
    h_.row(i) = h.row(src);
  }
}

VecchiaFactors VecchiaModel::factors(const KernelSpec& spec) const {
  spec.validate();
  if (spec.dims() != dims()) throw ShapeError("kernel ranges do not match the design dimension");
  const Eigen::Index n = this->n();
  VecchiaFactors out;
  out.omega.resize(n);
  out.h_tilde.resize(n, trend_size());
  out.g.resize(n, outputs());
  out.weights.assign(plan_.flat.size(), 0.0);
  std::vector<double> block_jitter(block_count(n), 0.0);
  parallel_for_blocks(block_count(n), [&](std::size_t b) {
    PointSolver solver(x_, y_, h_, spec, 0, plan_.m);
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index end = std::min(n, begin + kBlock);
    for (Eigen::Index i = begin; i < end; ++i) {
      const auto nb = plan_.neighbors_of(i);
      solver.solve(i, nb);
      out.omega[i] = solver.omega;
      out.h_tilde.row(i) = solver.h_tilde.transpose();
      out.g.row(i) = solver.g.transpose();
      const auto off = static_cast<std::size_t>(plan_.offsets[static_cast<std::size_t>(i)]);
      for (std::size_t a = 0; a < nb.size(); ++a) out.weights[off + a] = solver.w[static_cast<Eigen::Index>(a)];
      block_jitter[b] = std::max(block_jitter[b], solver.jitter);
    }
  });
  for (double j : block_jitter) out.max_jitter = std::max(out.max_jitter, j);
  return out;
}

MarginalEval VecchiaModel::evaluate(const KernelSpec& spec, const PriorSpec& prior, GradientMode mode) const {
  spec.validate();
  if (spec.dims() != dims()) throw ShapeError("kernel ranges do not match the design dimension");
  const Eigen::Index n = this->n();
  const Eigen::Index q = trend_size();
  const Eigen::Index k = outputs();
  const Eigen::Index params = gradient_count(mode, dims());
  std::vector<Accumulator> blocks(block_count(n), Accumulator(q, k, params));
  parallel_for_blocks(blocks.size(), [&](std::size_t b) {
    PointSolver solver(x_, y_, h_, spec, params, plan_.m);
    Accumulator& acc = blocks[b];
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index end = std::min(n, begin + kBlock);
    for (Eigen::Index i = begin; i < end; ++i) {
      solver.solve(i, plan_.neighbors_of(i));
      acc.add_point(solver.omega, solver.h_tilde, solver.g);
      acc.max_jitter = std::max(acc.max_jitter, solver.jitter);
      for (Eigen::Index j = 0; j < params; ++j) {
        acc.add_point_derivative(j, solver.omega, solver.omega_dot[j], solver.h_tilde, solver.g,
                                 solver.h_dot.col(j), solver.g_dot.col(j));
      }
    }
  });
  Accumulator total(q, k, params);
  for (const auto& acc : blocks) total.merge(acc);
  return finalize(total, n, q, k, params, spec, prior, mode);
}

VecchiaFactors vecchia_factors(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                               const ConditioningPlan& plan, const KernelSpec& spec, TrendBasis trend) {
  return VecchiaModel(x, y, plan, trend).factors(spec);
}

MarginalEval vecchia_marginal_neg2log(const VecchiaFactors& factors, const KernelSpec& spec,
                                      const PriorSpec& prior) {
  const Eigen::Index n = factors.size();
  const Eigen::Index q = factors.h_tilde.cols();
  const Eigen::Index k = factors.g.cols();
  std::vector<Accumulator> blocks(block_count(n), Accumulator(q, k, 0));
  Eigen::VectorXd h(q), g(k);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index end = std::min(n, begin + kBlock);
    for (Eigen::Index i = begin; i < end; ++i) {
      h = factors.h_tilde.row(i).transpose();
      g = factors.g.row(i).transpose();
      blocks[b].add_point(factors.omega[i], h, g);
    }
  }
  Accumulator total(q, k, 0);
  for (const auto& acc : blocks) total.merge(acc);
  total.max_jitter = factors.max_jitter;
  return finalize(total, n, q, k, 0, spec, prior, GradientMode::None);
}

Eigen::VectorXd vecchia_marginal_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                      const ConditioningPlan& plan, const KernelSpec& spec,
                                      TrendBasis trend, const PriorSpec& prior, GradientMode mode) {
  if (mode == GradientMode::None) mode = GradientMode::Ranges;
  return VecchiaModel(x, y, plan, trend).evaluate(spec, prior, mode).grad;
}

ProfiledEval profiled_neg2log(const VecchiaFactors& factors) {
  if (factors.g.cols() != 1) throw InvalidParameter("profiled likelihood is defined for a single output");
  const Eigen::Index n = factors.size();
  const Eigen::Index q = factors.h_tilde.cols();
  if (n <= q) throw DegenerateData("need more training points than trend coefficients (n > q)");
  const Eigen::VectorXd inv = factors.omega.cwiseInverse();
  ProfiledEval out;
  out.beta = Eigen::VectorXd::Zero(q);
  if (q > 0) {
    const Eigen::MatrixXd sigma = factors.h_tilde.transpose() * inv.asDiagonal() * factors.h_tilde;
    const Eigen::VectorXd u = factors.h_tilde.transpose() * inv.asDiagonal() * factors.g.col(0);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw DegenerateData("trend information matrix is singular");
    out.beta = llt.solve(u);
  }
  const Eigen::VectorXd resid = factors.g.col(0) - factors.h_tilde * out.beta;
  out.sigma2 = (resid.array().square() * inv.array()).sum() / static_cast<double>(n);
  out.value = static_cast<double>(n) * out.sigma2 + factors.omega.array().log().sum();
  return out;
}

}  // namespace vppe
