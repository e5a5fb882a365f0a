#pragma once

#include "vppe/fitting.hpp"
#include "vppe/ordering.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace vppe {

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

// Comma-separated, mandatory header row, locale-independent numbers. Throws
// ParseError with the line and column of the first bad cell.
Table read_csv(const std::string& path);
Table parse_csv(const std::string& text, const std::string& source = "<memory>");

void write_csv(const std::string& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values);
std::string format_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

// prefix1, prefix2, ..., prefix<count>
std::vector<std::string> numbered_header(const std::string& prefix, Eigen::Index count);

void write_index_file(const std::string& path, const std::vector<Eigen::Index>& rows);

nlohmann::json plan_to_json(const ConditioningPlan& plan);

nlohmann::json model_to_json(const FittedEmulator& model);
void save_model(const std::string& path, const FittedEmulator& model);

// Restores a model and reattaches its training data from the recorded CSV
// paths (normalized with the stored bounds).
FittedEmulator load_model(const std::string& path);
FittedEmulator model_from_json(const nlohmann::json& j);

}  // namespace vppe
