#include "vppe/design.hpp"

#include "vppe/error.hpp"
#include "vppe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace vppe {

DesignMatrix DesignMatrix::from_points(Eigen::MatrixXd points) {
  DesignMatrix d;
  if (points.rows() > 0) {
    d.lower = points.colwise().minCoeff().transpose();
    d.upper = points.colwise().maxCoeff().transpose();
  } else {
    d.lower = Eigen::VectorXd::Zero(points.cols());
    d.upper = Eigen::VectorXd::Ones(points.cols());
  }
  d.points = std::move(points);
  return d;
}

void DesignMatrix::validate() const {
  if (!points.allFinite()) throw ShapeError("design contains non-finite entries");
  if (normalized && (points.minCoeff() < 0.0 || points.maxCoeff() > 1.0)) {
    throw ShapeError("normalized design has entries outside [0,1]");
  }
  // Rows sorted on the first coordinate; duplicates can only sit inside a
  // window where that coordinate differs by at most the tolerance.
  constexpr double kTol = 1e-12;
  const Eigen::Index n = points.rows();
  if (n < 2 || points.cols() == 0) return;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return points(a, 0) < points(b, 0); });
  for (std::size_t s = 0; s < idx.size(); ++s) {
    for (std::size_t t = s + 1; t < idx.size(); ++t) {
      if (points(idx[t], 0) - points(idx[s], 0) > kTol) break;
      if (((points.row(idx[t]) - points.row(idx[s])).array().abs() <= kTol).all()) {
        throw DegenerateData("design rows " + std::to_string(std::min(idx[s], idx[t])) + " and " +
                             std::to_string(std::max(idx[s], idx[t])) + " coincide");
      }
    }
  }
}

Eigen::MatrixXd normalize_points(const Eigen::MatrixXd& raw, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper) {
  if (raw.cols() != lower.size() || raw.cols() != upper.size()) {
    throw ShapeError("input dimension " + std::to_string(raw.cols()) +
                     " does not match the normalization bounds (" + std::to_string(lower.size()) + ")");
  }
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index l = 0; l < raw.cols(); ++l) {
    const double span = upper[l] - lower[l];
    if (!(span > 0.0)) {
      throw DegenerateData("input dimension " + std::to_string(l + 1) + " is constant");
    }
    out.col(l) = (raw.col(l).array() - lower[l]) / span;
  }
  return out;
}

DesignMatrix normalize(const DesignMatrix& design) {
  DesignMatrix out;
  out.points = normalize_points(design.points, design.lower, design.upper);
  out.lower = design.lower;
  out.upper = design.upper;
  out.normalized = true;
  return out;
}

DesignMatrix lhs_sample(int n, int p, std::uint64_t seed) {
  if (n <= 0 || p <= 0) throw InvalidParameter("lhs_sample needs n >= 1 and p >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int l = 0; l < p; ++l) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) {
      // Clamp guards the (measure-zero) rounding case (n-1 + u)/n == 1.
      const double v = (perm[static_cast<std::size_t>(i)] + unif(rng)) / n;
      x(i, l) = std::min(v, std::nextafter((perm[static_cast<std::size_t>(i)] + 1.0) / n, 0.0));
    }
  }
  DesignMatrix d;
  d.points = std::move(x);
  d.lower = Eigen::VectorXd::Zero(p);
  d.upper = Eigen::VectorXd::Ones(p);
  d.normalized = true;
  return d;
}

OutputMatrix sample_gp_from_normals(const DesignMatrix& design, const KernelSpec& spec,
                                    double sigma2, const Eigen::MatrixXd& normals) {
  if (!(sigma2 > 0.0)) throw InvalidParameter("sigma2 must be positive");
  if (normals.rows() != design.rows()) throw ShapeError("normals must have one row per design point");
  Eigen::MatrixXd cov = correlation_matrix(spec, design.points) * sigma2;
  const Cholesky chol = factorize_with_jitter(cov, "the sampling covariance");
  // L L^T = sigma2 R, so F = L^T satisfies F^T F = sigma2 R and y = F^T U = L U.
  OutputMatrix out;
  out.values = chol.llt.matrixL() * normals;
  return out;
}

OutputMatrix sample_gp(const DesignMatrix& design, const KernelSpec& spec, double sigma2, int k,
                       std::uint64_t seed) {
  if (k <= 0) throw InvalidParameter("number of outputs must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd u(design.rows(), k);
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = normal(rng);
  return sample_gp_from_normals(design, spec, sigma2, u);
}

}  // namespace vppe
