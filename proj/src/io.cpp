#include "vppe/io.hpp"

#include "vppe/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace vppe {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ParseError("failed writing '" + path + "'");
}

Eigen::VectorXd vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

Eigen::MatrixXd mat(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) throw ParseError("model matrix has the wrong number of rows");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd r = vec(j.at(static_cast<std::size_t>(i)));
    if (r.size() != cols) throw ParseError("model matrix has the wrong number of columns");
    m.row(i) = r.transpose();
  }
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::vector<std::string> numbered_header(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> h;
  h.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 1; i <= count; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

Table parse_csv(const std::string& text, const std::string& source) {
  Table table;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(c);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " fields, header has " + std::to_string(table.header.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string_view cell = cells[c];
      double v = 0.0;
      const char* first = cell.data();
      if (!cell.empty() && cell.front() == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(source + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": not a finite number: '" + std::string(cell) + "'");
      }
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(source + ": missing header row");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return table;
}

Table read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

std::string format_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw ShapeError("header does not match column count");
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(i, c));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  write_file(path, format_csv(header, values));
}

void write_index_file(const std::string& path, const std::vector<Eigen::Index>& rows) {
  std::string out = "row\n";
  for (Eigen::Index r : rows) out += std::to_string(r) + '\n';
  write_file(path, out);
}

nlohmann::json plan_to_json(const ConditioningPlan& plan) {
  nlohmann::json j;
  j["m"] = plan.m;
  j["scale"] = to_json(plan.scale);
  j["order"] = plan.order;
  nlohmann::json nb = nlohmann::json::array();
  for (Eigen::Index i = 0; i < plan.size(); ++i) {
    const auto s = plan.neighbors_of(i);
    nb.push_back(std::vector<Eigen::Index>(s.begin(), s.end()));
  }
  j["neighbors"] = std::move(nb);
  return j;
}

nlohmann::json model_to_json(const FittedEmulator& model) {
  nlohmann::json j;
  j["kernel"] = to_string(model.spec.kernel);
  j["ranges"] = to_json(model.spec.ranges);
  j["nugget"] = model.spec.nugget;
  j["nugget_estimated"] = model.nugget_estimated;
  j["trend"] = to_string(model.trend);
  j["beta"] = to_json(model.beta);
  j["sigma2"] = to_json(model.sigma2);
  j["lower"] = to_json(model.lower);
  j["upper"] = to_json(model.upper);
  j["method"] = to_string(model.method);
  j["m"] = model.m;
  j["dof"] = model.dof;
  j["n"] = model.n();
  j["design_path"] = model.design_path;
  j["output_path"] = model.output_path;
  nlohmann::json prior;
  prior["kind"] = model.prior.kind == PriorKind::JointlyRobust ? "jointly_robust" : "none";
  if (model.prior.kind == PriorKind::JointlyRobust) {
    prior["a"] = model.prior.a;
    prior["b"] = model.prior.b;
    prior["c"] = to_json(model.prior.c);
  }
  j["prior"] = std::move(prior);
  nlohmann::json diag;
  diag["wall_seconds"] = model.diagnostics.wall_seconds;
  diag["objective"] = model.diagnostics.objective;
  diag["range_outputs"] = model.diagnostics.range_outputs;
  diag["beta_from_vecchia"] = model.diagnostics.beta_from_vecchia;
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedReport& s : model.diagnostics.seeds) {
    nlohmann::json r;
    r["round"] = s.round;
    r["start_ranges"] = to_json(s.start_ranges);
    r["end_ranges"] = to_json(s.end_ranges);
    r["objective"] = std::isfinite(s.objective) ? nlohmann::json(s.objective) : nlohmann::json(nullptr);
    r["iterations"] = s.iterations;
    r["evaluations"] = s.evaluations;
    r["converged"] = s.converged;
    r["skipped"] = s.skipped;
    r["status"] = s.status;
    seeds.push_back(std::move(r));
  }
  diag["seeds"] = std::move(seeds);
  j["diagnostics"] = std::move(diag);
  return j;
}

void save_model(const std::string& path, const FittedEmulator& model) { write_file(path, model_to_json(model).dump(2) + "\n"); }

FittedEmulator model_from_json(const nlohmann::json& j) {
  try {
    FittedEmulator model;
    model.spec.kernel = parse_kernel(j.at("kernel").get<std::string>());
    model.spec.ranges = vec(j.at("ranges"));
    model.spec.nugget = j.at("nugget").get<double>();
    model.spec.validate();
    model.nugget_estimated = j.value("nugget_estimated", false);
    model.trend = parse_trend(j.at("trend").get<std::string>());
    model.sigma2 = vec(j.at("sigma2"));
    const Eigen::Index q = model.trend.size(model.spec.dims());
    model.beta = mat(j.at("beta"), q, model.sigma2.size());
    model.lower = vec(j.at("lower"));
    model.upper = vec(j.at("upper"));
    model.method = parse_method(j.at("method").get<std::string>());
    model.m = j.at("m").get<int>();
    model.dof = j.at("dof").get<Eigen::Index>();
    model.design_path = j.at("design_path").get<std::string>();
    model.output_path = j.at("output_path").get<std::string>();
    const auto& prior = j.at("prior");
    if (prior.at("kind").get<std::string>() == "jointly_robust") {
      model.prior.kind = PriorKind::JointlyRobust;
      model.prior.a = prior.at("a").get<double>();
      model.prior.b = prior.at("b").get<double>();
      model.prior.c = vec(prior.at("c"));
    } else {
      model.prior.kind = PriorKind::None;
    }
    if (const auto it = j.find("diagnostics"); it != j.end()) {
      model.diagnostics.wall_seconds = it->value("wall_seconds", 0.0);
      model.diagnostics.objective = it->value("objective", 0.0);
    }
    if (model.lower.size() != model.spec.dims() || model.upper.size() != model.spec.dims()) {
      throw ParseError("model bounds do not match the number of ranges");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

FittedEmulator load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  FittedEmulator model = model_from_json(j);
  const Table x = read_csv(model.design_path);
  const Table y = read_csv(model.output_path);
  if (x.values.cols() != model.dims()) throw ShapeError("training design does not match the model dimension");
  if (y.values.rows() != x.values.rows()) throw ShapeError("training outputs do not match the design rows");
  if (y.values.cols() != model.outputs()) throw ShapeError("training outputs do not match the model outputs");
  model.data = std::make_shared<const TrainingData>(
      TrainingData{normalize_points(x.values, model.lower, model.upper), y.values});
  return model;
}

}  // namespace vppe
