#include "vppe/reshape.hpp"

#include "vppe/error.hpp"

#include <random>

namespace vppe {

Reshaped reshape_space_as_input(const Eigen::MatrixXd& design, const Eigen::MatrixXd& outputs,
                                const Eigen::VectorXd& coord, ReshapeMode mode, std::uint64_t seed) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::Index k = outputs.cols();
  if (outputs.rows() != n) throw ShapeError("output rows do not match design rows");
  if (coord.size() != k) {
    throw ShapeError("coordinate vector has " + std::to_string(coord.size()) + " entries for " +
                     std::to_string(k) + " output columns");
  }
  if (k == 0) throw ShapeError("no output columns to reshape");
  Reshaped out;
  if (mode == ReshapeMode::Full) {
    out.design.resize(n * k, p + 1);
    out.output.resize(n * k);
    out.column.resize(static_cast<std::size_t>(n * k));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index r = i * k + j;
        out.design.row(r).head(p) = design.row(i);
        out.design(r, p) = coord[j];
        out.output[r] = outputs(i, j);
        out.column[static_cast<std::size_t>(r)] = j;
      }
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, k - 1);
  out.design.resize(n, p + 1);
  out.output.resize(n);
  out.column.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = pick(rng);
    out.design.row(i).head(p) = design.row(i);
    out.design(i, p) = coord[j];
    out.output[i] = outputs(i, j);
    out.column[static_cast<std::size_t>(i)] = j;
  }
  return out;
}

}  // namespace vppe
