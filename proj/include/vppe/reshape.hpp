#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace vppe {

enum class ReshapeMode { Full, Sampled };

// Space-as-input form of an n x k output matrix whose columns sit at spatial
// coordinates coord_j: each (run, column) pair becomes one scalar observation
// with the coordinate appended as an extra input.
struct Reshaped {
  Eigen::MatrixXd design;             // rows x (p + 1)
  Eigen::VectorXd output;             // rows
  std::vector<Eigen::Index> column;   // source output column of each row
};

// Full: n * k rows, run-major (row i * k + j). Sampled: n rows, one output
// column drawn uniformly per run. Throws ShapeError when coord.size() != k.
Reshaped reshape_space_as_input(const Eigen::MatrixXd& design, const Eigen::MatrixXd& outputs,
                                const Eigen::VectorXd& coord, ReshapeMode mode, std::uint64_t seed = 0);

}  // namespace vppe
