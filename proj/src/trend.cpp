#include "vppe/trend.hpp"

#include "vppe/error.hpp"

namespace vppe {

TrendBasis parse_trend(std::string_view name) {
  if (name == "constant") return {TrendKind::Constant};
  if (name == "linear") return {TrendKind::Linear};
  if (name == "none") return {TrendKind::None};
  throw InvalidParameter("unknown trend '" + std::string(name) + "' (expected constant, linear or none)");
}

std::string to_string(TrendBasis trend) {
  switch (trend.kind) {
    case TrendKind::None:
      return "none";
    case TrendKind::Constant:
      return "constant";
    case TrendKind::Linear:
      return "linear";
  }
  return "none";
}

}  // namespace vppe
