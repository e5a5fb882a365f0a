#pragma once

#include "vppe/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace vppe {

// n x p input configurations. `lower`/`upper` are the per-dimension bounds used
// to map raw inputs onto the unit cube.
struct DesignMatrix {
  Eigen::MatrixXd points;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  bool normalized = false;

  [[nodiscard]] Eigen::Index rows() const { return points.rows(); }
  [[nodiscard]] Eigen::Index dims() const { return points.cols(); }

  // Wraps raw points; bounds are the column minima and maxima.
  static DesignMatrix from_points(Eigen::MatrixXd points);

  // Finite entries, no two rows equal within 1e-12 per coordinate, entries in
  // [0,1] when normalized. Throws ShapeError / DegenerateData.
  void validate() const;
};

// n x k simulator responses.
struct OutputMatrix {
  Eigen::MatrixXd values;

  [[nodiscard]] Eigen::Index rows() const { return values.rows(); }
  [[nodiscard]] Eigen::Index outputs() const { return values.cols(); }
};

// Maps the design onto [0,1]^p using its bounds. Throws DegenerateData for a
// constant input column.
DesignMatrix normalize(const DesignMatrix& design);

// Applies the normalization of `reference` to raw points (rows).
Eigen::MatrixXd normalize_points(const Eigen::MatrixXd& raw, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper);

// Random Latin hypercube on [0,1]^p: per column, a random permutation of the n
// strata with a uniform offset inside each stratum.
DesignMatrix lhs_sample(int n, int p, std::uint64_t seed);

// y = F^T U with F^T F = sigma2 * R, U an n x k matrix of iid standard normals.
OutputMatrix sample_gp(const DesignMatrix& design, const KernelSpec& spec, double sigma2, int k,
                       std::uint64_t seed);

// Same transform applied to caller-supplied normals (test hook).
OutputMatrix sample_gp_from_normals(const DesignMatrix& design, const KernelSpec& spec,
                                    double sigma2, const Eigen::MatrixXd& normals);

}  // namespace vppe
