#pragma once

#include "vppe/design.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vppe {

// Maximin ordering plus nearest-neighbour conditioning sets, built in the
// scaled metric x~ = x / scale. All indices are zero-based. order[i] is the
// design row placed at position i; neighbors_of(i) lists positions j < i
// (nearest first, ties by lower position), |b(i)| = min(m, i).
struct ConditioningPlan {
  std::vector<Eigen::Index> order;
  std::vector<Eigen::Index> offsets;  // CSR row pointers, size n + 1
  std::vector<Eigen::Index> flat;     // concatenated neighbour positions
  int m = 0;
  Eigen::VectorXd scale;

  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(order.size()); }
  [[nodiscard]] std::span<const Eigen::Index> neighbors_of(Eigen::Index i) const {
    const auto b = static_cast<std::size_t>(offsets[static_cast<std::size_t>(i)]);
    const auto e = static_cast<std::size_t>(offsets[static_cast<std::size_t>(i) + 1]);
    return {flat.data() + b, e - b};
  }
};

// scale_l = (max_l - min_l) / 5. Throws DegenerateData for a constant column.
Eigen::VectorXd default_scale(const DesignMatrix& design);

// Greedy maximin permutation. The first point is the one nearest the centroid
// unless `random_first_seed` is given, in which case it is drawn uniformly.
// Each later point maximizes the minimum scaled distance to the points already
// ordered; ties go to the lowest design row.
std::vector<Eigen::Index> maximin_order(const DesignMatrix& design, const Eigen::VectorXd& scale,
                                        std::optional<std::uint64_t> random_first_seed = std::nullopt);

// Exact nearest earlier-ordered neighbours (brute force, vectorized distances).
ConditioningPlan nn_condition(const DesignMatrix& design, std::vector<Eigen::Index> order, int m,
                              const Eigen::VectorXd& scale);

// maximin_order followed by nn_condition.
ConditioningPlan build_plan(const DesignMatrix& design, int m, const Eigen::VectorXd& scale,
                            std::optional<std::uint64_t> random_first_seed = std::nullopt);

}  // namespace vppe
