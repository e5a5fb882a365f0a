#pragma once

// Cephes-style exp(x): range reduction x = n ln2 + g with a split ln2, then a
// (2,3) Pade form for e^g. Scaling by 2^n builds the exponent bits directly so
// the scalar and vector variants agree bit for bit.

#include <bit>
#include <cmath>
#include <cstdint>

namespace vppe::simd::detail {

inline constexpr double kExpLowerLimit = -708.39;
inline constexpr double kLog2e = 1.4426950408889634073599;
inline constexpr double kLn2Hi = 6.93145751953125e-1;
inline constexpr double kLn2Lo = 1.42860682030941723212e-6;
inline constexpr double kP0 = 1.26177193074810590878e-4;
inline constexpr double kP1 = 3.02994407707441961300e-2;
inline constexpr double kP2 = 9.99999999999999999910e-1;
inline constexpr double kQ0 = 3.00198505138664455042e-6;
inline constexpr double kQ1 = 2.52448340349684104192e-3;
inline constexpr double kQ2 = 2.27265548208155028766e-1;
inline constexpr double kQ3 = 2.00000000000000000009e0;
inline constexpr double kTwo52 = 4503599627370496.0;

inline double exp_nonpositive(double x) {
  if (x < kExpLowerLimit) return 0.0;
  const double n = std::floor(kLog2e * x + 0.5);
  double g = x - n * kLn2Hi;
  g = g - n * kLn2Lo;
  const double gg = g * g;
  const double p = g * ((kP0 * gg + kP1) * gg + kP2);
  const double q = ((kQ0 * gg + kQ1) * gg + kQ2) * gg + kQ3;
  const double e = 1.0 + 2.0 * (p / (q - p));
  const std::uint64_t bits = std::bit_cast<std::uint64_t>((n + 1023.0) + kTwo52) << 52;
  return e * std::bit_cast<double>(bits);
}

}  // namespace vppe::simd::detail
