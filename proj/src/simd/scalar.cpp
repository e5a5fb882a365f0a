#include "simd/exp_poly.hpp"
#include "simd/variants.hpp"

#include <cmath>
#include <limits>

namespace vppe::simd {
namespace {

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kSqrt5 = 2.2360679774997896964;

void corr_row_scalar(const CorrParams& params, const double* anchor, Columns cols,
                     std::size_t count, double* corr, std::span<double* const> ratio) {
  const std::size_t dims = cols.size();
  const bool want_ratio = !ratio.empty();
  const double* inv = params.inv_range.data();

  switch (params.family) {
    case KernelFamily::Matern32:
    case KernelFamily::Matern52: {
      const bool m52 = params.family == KernelFamily::Matern52;
      const double root = m52 ? kSqrt5 : kSqrt3;
      for (std::size_t j = 0; j < count; ++j) {
        double poly = 1.0;
        double sum = 0.0;
        for (std::size_t l = 0; l < dims; ++l) {
          const double a = std::fabs(anchor[l] - cols[l][j]) * (root * inv[l]);
          const double f = m52 ? (1.0 + a) + a * a / 3.0 : 1.0 + a;
          poly = poly * f;
          sum = sum + a;
          if (want_ratio) {
            ratio[l][j] = m52 ? (a * a) * (1.0 + a) * inv[l] / (3.0 * f) : (a * a) * inv[l] / f;
          }
        }
        corr[j] = poly * detail::exp_nonpositive(-sum);
      }
      break;
    }
    case KernelFamily::PowerExponential: {
      const double alpha = params.alpha;
      for (std::size_t j = 0; j < count; ++j) {
        double sum = 0.0;
        for (std::size_t l = 0; l < dims; ++l) {
          const double s = std::fabs(anchor[l] - cols[l][j]) * inv[l];
          const double t = alpha == 2.0 ? s * s : (alpha == 1.0 ? s : std::pow(s, alpha));
          sum = sum + t;
          if (want_ratio) ratio[l][j] = alpha * t * inv[l];
        }
        corr[j] = detail::exp_nonpositive(-sum);
      }
      break;
    }
  }
}

void sq_dist_scalar(const double* anchor, Columns cols, std::size_t count, double* out) {
  const std::size_t dims = cols.size();
  for (std::size_t j = 0; j < count; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < dims; ++l) {
      const double d = cols[l][j] - anchor[l];
      s = s + d * d;
    }
    out[j] = s;
  }
}

std::size_t min_update_argmax_scalar(const double* anchor, Columns cols, std::size_t count,
                                     double* min_dist) {
  const std::size_t dims = cols.size();
  std::size_t best = count;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < dims; ++l) {
      const double d = cols[l][j] - anchor[l];
      s = s + d * d;
    }
    const double m = s < min_dist[j] ? s : min_dist[j];
    min_dist[j] = m;
    if (m > best_val) {
      best_val = m;
      best = j;
    }
  }
  return best;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", &corr_row_scalar, &sq_dist_scalar,
                                 &min_update_argmax_scalar};
  return table;
}

double exp_nonpositive(double x) { return detail::exp_nonpositive(x); }

}  // namespace vppe::simd
