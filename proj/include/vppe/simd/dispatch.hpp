#pragma once

// Data-parallel inner loops shared by ordering, the likelihood paths and
// prediction. Each routine has a scalar reference implementation and, on x86-64
// hosts that report AVX2 at runtime, a vectorized variant. Both variants
// perform the same IEEE operations in the same order per lane (no FMA
// contraction), so their outputs are bitwise identical; the tests check this.

#include "vppe/kernels.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace vppe::simd {

// Points are passed column-wise: cols[l][j] is coordinate l of point j.
using Columns = std::span<const double* const>;

struct CorrParams {
  KernelFamily family = KernelFamily::Matern32;
  double alpha = 2.0;
  std::span<const double> inv_range;
};

// corr[j] = prod_l c_l(|anchor_l - cols[l][j]|). When ratio is non-empty,
// ratio[l][j] = (d c_l / d lambda_l) / c_l, so that the derivative of the
// product correlation with respect to lambda_l is corr[j] * ratio[l][j].
using CorrRowFn = void (*)(const CorrParams& params, const double* anchor, Columns cols,
                           std::size_t count, double* corr, std::span<double* const> ratio);

// out[j] = sum_l (cols[l][j] - anchor_l)^2
using SqDistFn = void (*)(const double* anchor, Columns cols, std::size_t count, double* out);

// min_dist[j] = min(min_dist[j], |cols[.][j] - anchor|^2), then returns the
// index of the largest min_dist (lowest index on ties), or count if count == 0.
using MinUpdateArgmaxFn = std::size_t (*)(const double* anchor, Columns cols, std::size_t count,
                                          double* min_dist);

// Column pointers of a column-major matrix, in the layout Columns expects.
inline std::vector<const double*> column_pointers(const Eigen::MatrixXd& x) {
  std::vector<const double*> cols(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index l = 0; l < x.cols(); ++l) cols[static_cast<std::size_t>(l)] = x.col(l).data();
  return cols;
}

struct KernelTable {
  std::string_view name;
  CorrRowFn corr_row;
  SqDistFn sq_dist;
  MinUpdateArgmaxFn min_update_argmax;
};

const KernelTable& scalar_table();
// nullptr when the binary or the host lacks AVX2.
const KernelTable* avx2_table();

// The table used by the library. Chosen once from the host CPU; setting the
// environment variable VPPE_SIMD=scalar forces the reference path.
const KernelTable& active();
void force_scalar(bool on);

// exp(x) for x <= 0 with the shared polynomial used by every variant.
// Returns 0 below -708.39 (the normal-range limit).
double exp_nonpositive(double x);

}  // namespace vppe::simd
