#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace vppe {

enum class TrendKind { None, Constant, Linear };

// Mean trend basis h(x): none (q = 0), constant (q = 1) or (1, x^T) (q = 1 + p).
struct TrendBasis {
  TrendKind kind = TrendKind::Constant;

  [[nodiscard]] Eigen::Index size(Eigen::Index dims) const {
    switch (kind) {
      case TrendKind::None:
        return 0;
      case TrendKind::Constant:
        return 1;
      case TrendKind::Linear:
        return 1 + dims;
    }
    return 0;
  }

  // n x q matrix of basis functions evaluated at the rows of x.
  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h(x.rows(), size(x.cols()));
    if (h.cols() == 0) return h;
    h.col(0).setOnes();
    if (kind == TrendKind::Linear) h.rightCols(x.cols()) = x;
    return h;
  }
};

TrendBasis parse_trend(std::string_view name);
std::string to_string(TrendBasis trend);

}  // namespace vppe
