#include "vppe/exactgp.hpp"

#include "vppe/error.hpp"
#include "vppe/parallel.hpp"
#include "vppe/simd/dispatch.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace vppe {
namespace {

constexpr Eigen::Index kPairBlock = 64;

struct GlsParts {
  Eigen::MatrixXd zh;  // L^-1 H
  Eigen::MatrixXd ze;  // L^-1 (Y - H beta)
  Eigen::MatrixXd beta;
  Eigen::VectorXd y_norm2;  // y^T R~^-1 y
  Eigen::LLT<Eigen::MatrixXd> info;
  double log_det_info = 0.0;
};

GlsParts gls(const Cholesky& chol, const Eigen::MatrixXd& h, const Eigen::MatrixXd& y) {
  GlsParts out;
  const auto l = chol.llt.matrixL();
  const Eigen::Index q = h.cols();
  out.zh.resize(h.rows(), q);
  // Eigen's triangular solve touches element (0,0) even for empty right-hand sides.
  if (q > 0) out.zh = l.solve(h);
  out.ze = l.solve(y);
  out.y_norm2 = out.ze.colwise().squaredNorm().transpose();
  out.beta = Eigen::MatrixXd::Zero(q, y.cols());
  if (q == 0) return out;
  const Eigen::MatrixXd a = out.zh.transpose() * out.zh;
  out.info.compute(a);
  if (out.info.info() != Eigen::Success || !(out.info.matrixLLT().diagonal().array() > 0.0).all()) {
    throw DegenerateData("trend information matrix H^T R^-1 H is singular");
  }
  out.log_det_info = 2.0 * out.info.matrixLLT().diagonal().array().log().sum();
  out.beta = out.info.solve(out.zh.transpose() * out.ze);
  out.ze.noalias() -= out.zh * out.beta;
  return out;
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec, TrendBasis trend) {
  spec.validate();
  if (x.cols() != spec.dims()) throw ShapeError("kernel ranges do not match the design dimension");
  if (y.rows() != x.rows()) throw ShapeError("output rows do not match design rows");
  if (x.rows() <= trend.size(x.cols())) {
    throw DegenerateData("need more training points than trend coefficients (n > q)");
  }
}

// sum_{a != b} M_ab dR_ab / d lambda_l for each l, using the lower triangle of M.
Eigen::VectorXd pair_trace(const KernelSpec& spec, const Eigen::MatrixXd& x, const Eigen::MatrixXd& m) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd inv = spec.ranges.cwiseInverse();
  const simd::CorrParams params{spec.kernel.family, spec.kernel.alpha,
                                std::span<const double>(inv.data(), static_cast<std::size_t>(p))};
  const auto base = simd::column_pointers(x);
  const auto& table = simd::active();
  const auto blocks = static_cast<std::size_t>((n + kPairBlock - 1) / kPairBlock);
  std::vector<Eigen::VectorXd> partial(blocks, Eigen::VectorXd::Zero(p));
  parallel_for_blocks(blocks, [&](std::size_t blk) {
    Eigen::VectorXd corr(n);
    Eigen::MatrixXd ratio(n, p);
    Eigen::VectorXd anchor(p);
    std::vector<const double*> cols(base.size());
    std::vector<double*> ratio_ptrs(static_cast<std::size_t>(p));
    for (Eigen::Index l = 0; l < p; ++l) ratio_ptrs[static_cast<std::size_t>(l)] = ratio.col(l).data();
    Eigen::VectorXd& acc = partial[blk];
    const Eigen::Index begin = static_cast<Eigen::Index>(blk) * kPairBlock;
    const Eigen::Index end = std::min(n, begin + kPairBlock);
    for (Eigen::Index b = begin; b < end; ++b) {
      const Eigen::Index count = n - b - 1;
      if (count == 0) continue;
      for (std::size_t l = 0; l < base.size(); ++l) cols[l] = base[l] + b + 1;
      anchor = x.row(b).transpose();
      table.corr_row(params, anchor.data(), cols, static_cast<std::size_t>(count), corr.data(), ratio_ptrs);
      const auto mcol = m.col(b).segment(b + 1, count);
      const Eigen::VectorXd weighted = mcol.cwiseProduct(corr.head(count));
      for (Eigen::Index l = 0; l < p; ++l) acc[l] += 2.0 * weighted.dot(ratio.col(l).head(count));
    }
  });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (const auto& v : partial) out += v;
  return out;
}

}  // namespace

ExactEval exact_marginal_neg2log(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                                 TrendBasis trend, const PriorSpec& prior, GradientMode mode) {
  check_inputs(x, y, spec, trend);
  const Eigen::Index n = x.rows();
  const Eigen::Index k = y.cols();
  const Eigen::MatrixXd h = trend.evaluate(x);
  const Eigen::Index q = h.cols();

  auto chol = std::make_shared<Cholesky>(factorize_with_jitter(correlation_matrix(spec, x), "R + nu^2 I"));
  GlsParts parts = gls(*chol, h, y);

  ExactEval out;
  out.beta = parts.beta;
  out.s2 = parts.ze.colwise().squaredNorm().transpose();
  for (Eigen::Index l = 0; l < k; ++l) {
    if (!std::isfinite(out.s2[l]) || out.s2[l] <= 64.0 * std::numeric_limits<double>::epsilon() * parts.y_norm2[l]) {
      throw DegenerateData("quadratic form S^2 is not positive for output column " + std::to_string(l + 1));
    }
  }
  out.log_det_r = chol->log_det();
  out.log_det_info = parts.log_det_info;
  const PriorValue pv = prior_term(spec, prior, mode);
  out.log_prior_term = pv.value;
  const auto nq = static_cast<double>(n - q);
  const auto kd = static_cast<double>(k);
  out.neg2log = nq * out.s2.array().log().sum() + kd * out.log_det_r + kd * out.log_det_info + pv.value;

  if (mode != GradientMode::None) {
    // M = k Q - sum_l (n - q) / S_l^2 b_l b_l^T with b_l = Q y_l, so that
    // d neg2log / d theta = tr(M dR/d theta) + prior terms. Lower triangle only.
    const auto l = chol->llt.matrixL();
    Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
    l.solveInPlace(linv);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose(), kd);
    if (q > 0) {
      // R~^-1 H A^-1 H^T R~^-1 = T T^T with T = L^-T Z_H L_A^-T.
      Eigen::MatrixXd t = l.transpose().solve(parts.zh);
      t = parts.info.matrixL().solve(t.transpose()).transpose();
      m.selfadjointView<Eigen::Lower>().rankUpdate(t, -kd);
    }
    Eigen::MatrixXd b = l.transpose().solve(parts.ze);
    for (Eigen::Index c = 0; c < k; ++c) b.col(c) *= std::sqrt(nq / out.s2[c]);
    m.selfadjointView<Eigen::Lower>().rankUpdate(b, -1.0);

    const Eigen::Index p = spec.dims();
    out.grad = Eigen::VectorXd::Zero(mode == GradientMode::RangesAndNugget ? p + 1 : p);
    out.grad.head(p) = pair_trace(spec, x, m);
    if (mode == GradientMode::RangesAndNugget) out.grad[p] = m.diagonal().sum();
    out.grad += pv.grad;
  }
  out.factor = std::move(chol);
  return out;
}

Eigen::MatrixXd gls_beta(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                         TrendBasis trend) {
  check_inputs(x, y, spec, trend);
  const Cholesky chol = factorize_with_jitter(correlation_matrix(spec, x), "R + nu^2 I");
  return gls(chol, trend.evaluate(x), y).beta;
}

Eigen::VectorXd sigma2_hat(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& spec,
                           TrendBasis trend, const Eigen::MatrixXd& beta) {
  check_inputs(x, y, spec, trend);
  const Eigen::MatrixXd h = trend.evaluate(x);
  if (beta.rows() != h.cols() || beta.cols() != y.cols()) throw ShapeError("beta must be q x k");
  const Cholesky chol = factorize_with_jitter(correlation_matrix(spec, x), "R + nu^2 I");
  const Eigen::MatrixXd z = chol.llt.matrixL().solve(y - h * beta);
  return z.colwise().squaredNorm().transpose() / static_cast<double>(x.rows() - h.cols());
}

}  // namespace vppe
