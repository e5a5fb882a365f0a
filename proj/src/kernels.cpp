#include "vppe/kernels.hpp"

#include "vppe/error.hpp"
#include "vppe/simd/dispatch.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace vppe {
namespace {

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kSqrt5 = 2.2360679774997896964;

void check_range(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidParameter("range parameter must be positive and finite");
  }
}

void check_dims(const KernelSpec& spec, const ConstPoint& a, const ConstPoint& b) {
  if (a.size() != spec.dims() || b.size() != spec.dims()) {
    throw ShapeError("point dimension does not match the number of range parameters");
  }
}

}  // namespace

void KernelSpec::validate() const {
  if (ranges.size() == 0) throw InvalidParameter("kernel needs at least one range parameter");
  for (Eigen::Index l = 0; l < ranges.size(); ++l) check_range(ranges[l]);
  if (kernel.family == KernelFamily::PowerExponential &&
      !(kernel.alpha >= 1.0 && kernel.alpha <= 2.0)) {
    throw InvalidParameter("power-exponential alpha must lie in [1, 2]");
  }
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) {
    throw InvalidParameter("nugget-variance ratio must be nonnegative");
  }
}

double corr_1d(const Kernel& kernel, double d, double lambda) {
  check_range(lambda);
  if (!(d >= 0.0)) throw InvalidParameter("distance must be nonnegative");
  switch (kernel.family) {
    case KernelFamily::PowerExponential:
      return std::exp(-std::pow(d / lambda, kernel.alpha));
    case KernelFamily::Matern32: {
      const double a = kSqrt3 * d / lambda;
      return (1.0 + a) * std::exp(-a);
    }
    case KernelFamily::Matern52: {
      const double a = kSqrt5 * d / lambda;
      return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
  }
  return 0.0;
}

double corr_1d_dlambda(const Kernel& kernel, double d, double lambda) {
  check_range(lambda);
  if (!(d >= 0.0)) throw InvalidParameter("distance must be nonnegative");
  if (d == 0.0) return 0.0;
  switch (kernel.family) {
    case KernelFamily::PowerExponential: {
      const double t = std::pow(d / lambda, kernel.alpha);
      return std::exp(-t) * kernel.alpha * t / lambda;
    }
    case KernelFamily::Matern32: {
      const double a = kSqrt3 * d / lambda;
      return a * a * std::exp(-a) / lambda;
    }
    case KernelFamily::Matern52: {
      const double a = kSqrt5 * d / lambda;
      return a * a * (1.0 + a) * std::exp(-a) / (3.0 * lambda);
    }
  }
  return 0.0;
}

double corr_product(const KernelSpec& spec, const ConstPoint& x_i, const ConstPoint& x_j) {
  check_dims(spec, x_i, x_j);
  double c = 1.0;
  for (Eigen::Index l = 0; l < spec.dims(); ++l) {
    c *= corr_1d(spec.kernel, std::fabs(x_i[l] - x_j[l]), spec.ranges[l]);
  }
  return c;
}

CorrDerivs corr_product_grad(const KernelSpec& spec, const ConstPoint& x_i, const ConstPoint& x_j) {
  check_dims(spec, x_i, x_j);
  const Eigen::Index p = spec.dims();
  Eigen::VectorXd c(p), dc(p);
  for (Eigen::Index l = 0; l < p; ++l) {
    const double d = std::fabs(x_i[l] - x_j[l]);
    c[l] = corr_1d(spec.kernel, d, spec.ranges[l]);
    dc[l] = corr_1d_dlambda(spec.kernel, d, spec.ranges[l]);
  }
  // Leave-one-out products via prefix/suffix sweeps; avoids dividing by a
  // factor that may have underflowed to zero.
  Eigen::VectorXd prefix(p + 1), suffix(p + 1);
  prefix[0] = 1.0;
  suffix[p] = 1.0;
  for (Eigen::Index l = 0; l < p; ++l) prefix[l + 1] = prefix[l] * c[l];
  for (Eigen::Index l = p; l > 0; --l) suffix[l - 1] = suffix[l] * c[l - 1];
  CorrDerivs out;
  out.value = prefix[p];
  out.d_dlambda.resize(p);
  for (Eigen::Index l = 0; l < p; ++l) out.d_dlambda[l] = prefix[l] * dc[l] * suffix[l + 1];
  return out;
}

Kernel parse_kernel(std::string_view name) {
  if (name == "matern32") return {KernelFamily::Matern32, 2.0};
  if (name == "matern52") return {KernelFamily::Matern52, 2.0};
  constexpr std::string_view prefix = "pow_exp:";
  if (name.substr(0, prefix.size()) == prefix) {
    const std::string_view num = name.substr(prefix.size());
    double alpha = 0.0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), alpha);
    if (ec != std::errc() || ptr != num.data() + num.size()) {
      throw InvalidParameter("cannot parse power-exponential alpha in '" + std::string(name) + "'");
    }
    if (!(alpha >= 1.0 && alpha <= 2.0)) {
      throw InvalidParameter("power-exponential alpha must lie in [1, 2]");
    }
    return {KernelFamily::PowerExponential, alpha};
  }
  throw InvalidParameter("unknown kernel '" + std::string(name) +
                         "' (expected matern32, matern52 or pow_exp:<alpha>)");
}

std::string to_string(const Kernel& kernel) {
  switch (kernel.family) {
    case KernelFamily::Matern32:
      return "matern32";
    case KernelFamily::Matern52:
      return "matern52";
    case KernelFamily::PowerExponential: {
      std::ostringstream os;
      os.precision(17);
      os << "pow_exp:" << kernel.alpha;
      return os.str();
    }
  }
  return "unknown";
}

Eigen::MatrixXd correlation_matrix(const KernelSpec& spec, const Eigen::MatrixXd& x) {
  spec.validate();
  if (x.cols() != spec.dims()) throw ShapeError("design dimension does not match kernel ranges");
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd inv = spec.ranges.cwiseInverse();
  const simd::CorrParams params{spec.kernel.family, spec.kernel.alpha,
                                std::span<const double>(inv.data(), static_cast<std::size_t>(inv.size()))};
  const auto cols = simd::column_pointers(x);
  const auto& table = simd::active();
  Eigen::MatrixXd r(n, n);
  Eigen::VectorXd anchor(x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    anchor = x.row(i).transpose();
    // Column i, rows 0..i-1 receive the correlations with the earlier points.
    table.corr_row(params, anchor.data(), cols, static_cast<std::size_t>(i), r.col(i).data(), {});
    r(i, i) = 1.0 + spec.nugget;
  }
  r.triangularView<Eigen::StrictlyLower>() = r.transpose().triangularView<Eigen::StrictlyLower>();
  return r;
}

Eigen::MatrixXd cross_correlation(const KernelSpec& spec, const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  spec.validate();
  if (a.cols() != spec.dims() || b.cols() != spec.dims()) {
    throw ShapeError("design dimension does not match kernel ranges");
  }
  const Eigen::VectorXd inv = spec.ranges.cwiseInverse();
  const simd::CorrParams params{spec.kernel.family, spec.kernel.alpha,
                                std::span<const double>(inv.data(), static_cast<std::size_t>(inv.size()))};
  const auto cols = simd::column_pointers(a);
  const auto& table = simd::active();
  Eigen::MatrixXd out(a.rows(), b.rows());
  Eigen::VectorXd anchor(b.cols());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    anchor = b.row(j).transpose();
    table.corr_row(params, anchor.data(), cols, static_cast<std::size_t>(a.rows()), out.col(j).data(), {});
  }
  return out;
}

}  // namespace vppe
