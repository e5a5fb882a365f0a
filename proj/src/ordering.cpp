#include "vppe/ordering.hpp"

#include "vppe/error.hpp"
#include "vppe/simd/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <utility>

namespace vppe {
namespace {

// Column-major scaled copy: col l holds x_il / scale_l for the rows in `rows`
// (all rows, in order, when rows is empty).
Eigen::MatrixXd scaled_columns(const DesignMatrix& design, const Eigen::VectorXd& scale,
                               std::span<const Eigen::Index> rows = {}) {
  if (scale.size() != design.dims()) throw ShapeError("scale length does not match design dimension");
  for (Eigen::Index l = 0; l < scale.size(); ++l) {
    if (!(scale[l] > 0.0) || !std::isfinite(scale[l])) {
      throw InvalidParameter("ordering scale entries must be positive");
    }
  }
  const Eigen::Index n = rows.empty() ? design.rows() : static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd out(n, design.dims());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = rows.empty() ? i : rows[static_cast<std::size_t>(i)];
    out.row(i) = design.points.row(src).cwiseQuotient(scale.transpose());
  }
  return out;
}

}  // namespace

Eigen::VectorXd default_scale(const DesignMatrix& design) {
  if (design.rows() == 0) throw DegenerateData("empty design");
  Eigen::VectorXd scale(design.dims());
  for (Eigen::Index l = 0; l < design.dims(); ++l) {
    const double span = design.points.col(l).maxCoeff() - design.points.col(l).minCoeff();
    if (!(span > 0.0)) {
      throw DegenerateData("input dimension " + std::to_string(l + 1) + " is constant");
    }
    scale[l] = span / 5.0;
  }
  return scale;
}

std::vector<Eigen::Index> maximin_order(const DesignMatrix& design, const Eigen::VectorXd& scale,
                                        std::optional<std::uint64_t> random_first_seed) {
  const Eigen::Index n = design.rows();
  std::vector<Eigen::Index> order;
  if (n == 0) return order;
  order.reserve(static_cast<std::size_t>(n));
  const Eigen::MatrixXd xs = scaled_columns(design, scale);
  const auto cols = simd::column_pointers(xs);
  const auto& table = simd::active();
  const auto count = static_cast<std::size_t>(n);

  std::vector<double> dist(count);
  Eigen::Index first = 0;
  if (random_first_seed) {
    std::mt19937_64 rng(*random_first_seed);
    first = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  } else {
    const Eigen::VectorXd centroid = xs.colwise().mean().transpose();
    table.sq_dist(centroid.data(), cols, count, dist.data());
    first = std::min_element(dist.begin(), dist.end()) - dist.begin();
  }

  std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
  Eigen::Index last = first;
  dist[static_cast<std::size_t>(last)] = -1.0;
  order.push_back(last);
  Eigen::VectorXd anchor(xs.cols());
  for (Eigen::Index step = 1; step < n; ++step) {
    anchor = xs.row(last).transpose();
    const auto next = static_cast<Eigen::Index>(table.min_update_argmax(anchor.data(), cols, count, dist.data()));
    dist[static_cast<std::size_t>(next)] = -1.0;
    order.push_back(next);
    last = next;
  }
  return order;
}

ConditioningPlan nn_condition(const DesignMatrix& design, std::vector<Eigen::Index> order, int m,
                              const Eigen::VectorXd& scale) {
  const Eigen::Index n = design.rows();
  if (static_cast<Eigen::Index>(order.size()) != n) throw ShapeError("ordering length does not match design");
  if (m < 1) throw InvalidParameter("conditioning size m must be at least 1");
  if (n > 1 && m >= n) {
    throw InvalidParameter("conditioning size m = " + std::to_string(m) + " must be below n = " +
                           std::to_string(n));
  }
  {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (Eigen::Index o : order) {
      if (o < 0 || o >= n || seen[static_cast<std::size_t>(o)]) throw InvalidParameter("ordering is not a permutation");
      seen[static_cast<std::size_t>(o)] = 1;
    }
  }

  ConditioningPlan plan;
  plan.m = m;
  plan.scale = scale;
  const Eigen::MatrixXd xs = scaled_columns(design, scale, order);
  const auto cols = simd::column_pointers(xs);
  const auto& table = simd::active();

  plan.offsets.resize(static_cast<std::size_t>(n) + 1);
  plan.offsets[0] = 0;
  plan.flat.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  std::vector<double> dist(static_cast<std::size_t>(n));
  using Entry = std::pair<double, Eigen::Index>;
  std::vector<Entry> heap;
  heap.reserve(static_cast<std::size_t>(m) + 1);
  Eigen::VectorXd anchor(xs.cols());

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto prefix = static_cast<std::size_t>(i);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(m), prefix);
    if (take == prefix) {
      for (std::size_t j = 0; j < prefix; ++j) heap.emplace_back(0.0, static_cast<Eigen::Index>(j));
      // All predecessors; order them by distance for a uniform layout.
      anchor = xs.row(i).transpose();
      table.sq_dist(anchor.data(), cols, prefix, dist.data());
      for (auto& e : heap) e.first = dist[static_cast<std::size_t>(e.second)];
      std::sort(heap.begin(), heap.end());
    } else {
      anchor = xs.row(i).transpose();
      table.sq_dist(anchor.data(), cols, prefix, dist.data());
      // Max-heap on (distance, position); positions arrive in increasing
      // order so a later point replaces the top only when strictly closer.
      for (std::size_t j = 0; j < take; ++j) heap.emplace_back(dist[j], static_cast<Eigen::Index>(j));
      std::make_heap(heap.begin(), heap.end());
      for (std::size_t j = take; j < prefix; ++j) {
        if (dist[j] < heap.front().first) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = Entry{dist[j], static_cast<Eigen::Index>(j)};
          std::push_heap(heap.begin(), heap.end());
        }
      }
      std::sort_heap(heap.begin(), heap.end());
    }
    for (const auto& e : heap) plan.flat.push_back(e.second);
    heap.clear();
    plan.offsets[prefix + 1] = static_cast<Eigen::Index>(plan.flat.size());
  }
  plan.order = std::move(order);
  return plan;
}

ConditioningPlan build_plan(const DesignMatrix& design, int m, const Eigen::VectorXd& scale,
                            std::optional<std::uint64_t> random_first_seed) {
  return nn_condition(design, maximin_order(design, scale, random_first_seed), m, scale);
}

}  // namespace vppe
