#include "simd/exp_poly.hpp"
#include "simd/variants.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define VPPE_HAVE_AVX2_VARIANT 1
#include <immintrin.h>
#else
#define VPPE_HAVE_AVX2_VARIANT 0
#endif

#include <array>
#include <cmath>
#include <limits>

namespace vppe::simd {

#if VPPE_HAVE_AVX2_VARIANT

#define VPPE_AVX2 __attribute__((target("avx2")))

namespace {

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kSqrt5 = 2.2360679774997896964;

VPPE_AVX2 inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

VPPE_AVX2 inline __m256d exp_nonpositive_pd(__m256d x) {
  using namespace detail;
  const __m256d too_small = _mm256_cmp_pd(x, _mm256_set1_pd(kExpLowerLimit), _CMP_LT_OQ);
  const __m256d n = _mm256_floor_pd(
      _mm256_add_pd(_mm256_mul_pd(_mm256_set1_pd(kLog2e), x), _mm256_set1_pd(0.5)));
  __m256d g = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(kLn2Hi)));
  g = _mm256_sub_pd(g, _mm256_mul_pd(n, _mm256_set1_pd(kLn2Lo)));
  const __m256d gg = _mm256_mul_pd(g, g);
  __m256d p = _mm256_add_pd(_mm256_mul_pd(_mm256_set1_pd(kP0), gg), _mm256_set1_pd(kP1));
  p = _mm256_add_pd(_mm256_mul_pd(p, gg), _mm256_set1_pd(kP2));
  p = _mm256_mul_pd(g, p);
  __m256d q = _mm256_add_pd(_mm256_mul_pd(_mm256_set1_pd(kQ0), gg), _mm256_set1_pd(kQ1));
  q = _mm256_add_pd(_mm256_mul_pd(q, gg), _mm256_set1_pd(kQ2));
  q = _mm256_add_pd(_mm256_mul_pd(q, gg), _mm256_set1_pd(kQ3));
  const __m256d ratio = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  const __m256d e = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_mul_pd(_mm256_set1_pd(2.0), ratio));
  const __m256d biased =
      _mm256_add_pd(_mm256_add_pd(n, _mm256_set1_pd(1023.0)), _mm256_set1_pd(kTwo52));
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
  const __m256d r = _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), too_small);
}

VPPE_AVX2 void corr_row_avx2(const CorrParams& params, const double* anchor, Columns cols,
                             std::size_t count, double* corr, std::span<double* const> ratio) {
  const std::size_t dims = cols.size();
  const bool want_ratio = !ratio.empty();
  const double* inv = params.inv_range.data();
  const std::size_t vec_end = count & ~std::size_t{3};
  const __m256d one = _mm256_set1_pd(1.0);

  switch (params.family) {
    case KernelFamily::Matern32:
    case KernelFamily::Matern52: {
      const bool m52 = params.family == KernelFamily::Matern52;
      const double root = m52 ? kSqrt5 : kSqrt3;
      for (std::size_t j = 0; j < vec_end; j += 4) {
        __m256d poly = one;
        __m256d sum = _mm256_setzero_pd();
        for (std::size_t l = 0; l < dims; ++l) {
          const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(anchor[l]), _mm256_loadu_pd(cols[l] + j));
          const __m256d a = _mm256_mul_pd(abs_pd(diff), _mm256_set1_pd(root * inv[l]));
          const __m256d a2 = _mm256_mul_pd(a, a);
          const __m256d onea = _mm256_add_pd(one, a);
          const __m256d f =
              m52 ? _mm256_add_pd(onea, _mm256_div_pd(a2, _mm256_set1_pd(3.0))) : onea;
          poly = _mm256_mul_pd(poly, f);
          sum = _mm256_add_pd(sum, a);
          if (want_ratio) {
            const __m256d il = _mm256_set1_pd(inv[l]);
            __m256d r;
            if (m52) {
              r = _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(a2, onea), il),
                                _mm256_mul_pd(_mm256_set1_pd(3.0), f));
            } else {
              r = _mm256_div_pd(_mm256_mul_pd(a2, il), f);
            }
            _mm256_storeu_pd(ratio[l] + j, r);
          }
        }
        const __m256d neg = _mm256_sub_pd(_mm256_setzero_pd(), sum);
        _mm256_storeu_pd(corr + j, _mm256_mul_pd(poly, exp_nonpositive_pd(neg)));
      }
      break;
    }
    case KernelFamily::PowerExponential: {
      const double alpha = params.alpha;
      for (std::size_t j = 0; j < vec_end; j += 4) {
        __m256d sum = _mm256_setzero_pd();
        for (std::size_t l = 0; l < dims; ++l) {
          const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(anchor[l]), _mm256_loadu_pd(cols[l] + j));
          const __m256d s = _mm256_mul_pd(abs_pd(diff), _mm256_set1_pd(inv[l]));
          __m256d t;
          if (alpha == 2.0) {
            t = _mm256_mul_pd(s, s);
          } else if (alpha == 1.0) {
            t = s;
          } else {
            alignas(32) std::array<double, 4> lanes;
            _mm256_store_pd(lanes.data(), s);
            for (double& v : lanes) v = std::pow(v, alpha);
            t = _mm256_load_pd(lanes.data());
          }
          sum = _mm256_add_pd(sum, t);
          if (want_ratio) {
            const __m256d r = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(alpha), t),
                                            _mm256_set1_pd(inv[l]));
            _mm256_storeu_pd(ratio[l] + j, r);
          }
        }
        const __m256d neg = _mm256_sub_pd(_mm256_setzero_pd(), sum);
        _mm256_storeu_pd(corr + j, exp_nonpositive_pd(neg));
      }
      break;
    }
  }

  if (vec_end < count) {
    std::array<const double*, 64> shifted{};
    std::array<double*, 64> shifted_ratio{};
    // Tails are rare and short; dims beyond 64 fall back to the whole scalar row.
    if (dims > shifted.size()) {
      scalar_table().corr_row(params, anchor, cols, count, corr, ratio);
      return;
    }
    for (std::size_t l = 0; l < dims; ++l) {
      shifted[l] = cols[l] + vec_end;
      if (want_ratio) shifted_ratio[l] = ratio[l] + vec_end;
    }
    scalar_table().corr_row(params, anchor, Columns(shifted.data(), dims), count - vec_end,
                            corr + vec_end,
                            want_ratio ? std::span<double* const>(shifted_ratio.data(), dims)
                                       : std::span<double* const>{});
  }
}

VPPE_AVX2 inline __m256d sq_dist_block(const double* anchor, Columns cols, std::size_t j) {
  __m256d s = _mm256_setzero_pd();
  for (std::size_t l = 0; l < cols.size(); ++l) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(cols[l] + j), _mm256_set1_pd(anchor[l]));
    s = _mm256_add_pd(s, _mm256_mul_pd(d, d));
  }
  return s;
}

double sq_dist_tail(const double* anchor, Columns cols, std::size_t j) {
  double s = 0.0;
  for (std::size_t l = 0; l < cols.size(); ++l) {
    const double d = cols[l][j] - anchor[l];
    s = s + d * d;
  }
  return s;
}

VPPE_AVX2 void sq_dist_avx2(const double* anchor, Columns cols, std::size_t count, double* out) {
  const std::size_t vec_end = count & ~std::size_t{3};
  for (std::size_t j = 0; j < vec_end; j += 4) {
    _mm256_storeu_pd(out + j, sq_dist_block(anchor, cols, j));
  }
  for (std::size_t j = vec_end; j < count; ++j) out[j] = sq_dist_tail(anchor, cols, j);
}

VPPE_AVX2 std::size_t min_update_argmax_avx2(const double* anchor, Columns cols, std::size_t count,
                                             double* min_dist) {
  const std::size_t vec_end = count & ~std::size_t{3};
  __m256d best_val = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256i best_idx = _mm256_set1_epi64x(static_cast<long long>(count));
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i step = _mm256_set1_epi64x(4);
  for (std::size_t j = 0; j < vec_end; j += 4) {
    const __m256d s = sq_dist_block(anchor, cols, j);
    const __m256d m = _mm256_min_pd(s, _mm256_loadu_pd(min_dist + j));
    _mm256_storeu_pd(min_dist + j, m);
    const __m256d gt = _mm256_cmp_pd(m, best_val, _CMP_GT_OQ);
    best_val = _mm256_blendv_pd(best_val, m, gt);
    best_idx = _mm256_castpd_si256(
        _mm256_blendv_pd(_mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), gt));
    idx = _mm256_add_epi64(idx, step);
  }
  alignas(32) std::array<double, 4> vals;
  alignas(32) std::array<long long, 4> ids;
  _mm256_store_pd(vals.data(), best_val);
  _mm256_store_si256(reinterpret_cast<__m256i*>(ids.data()), best_idx);
  std::size_t best = count;
  double bv = -std::numeric_limits<double>::infinity();
  for (std::size_t lane = 0; lane < 4; ++lane) {
    const auto id = static_cast<std::size_t>(ids[lane]);
    if (id == count) continue;
    if (vals[lane] > bv || (vals[lane] == bv && id < best)) {
      bv = vals[lane];
      best = id;
    }
  }
  for (std::size_t j = vec_end; j < count; ++j) {
    const double s = sq_dist_tail(anchor, cols, j);
    const double m = s < min_dist[j] ? s : min_dist[j];
    min_dist[j] = m;
    if (m > bv) {
      bv = m;
      best = j;
    }
  }
  return best;
}

}  // namespace

const KernelTable* avx2_table_unchecked() {
  static const KernelTable table{"avx2", &corr_row_avx2, &sq_dist_avx2, &min_update_argmax_avx2};
  return &table;
}

#else

const KernelTable* avx2_table_unchecked() { return nullptr; }

#endif

}  // namespace vppe::simd
