#include "commands.hpp"

#include "vppe/design.hpp"
#include "vppe/error.hpp"
#include "vppe/fitting.hpp"
#include "vppe/io.hpp"
#include "vppe/parallel.hpp"
#include "vppe/predict.hpp"
#include "vppe/reshape.hpp"
#include "vppe/vecchia.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace vppe::cli {
namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string join(const Eigen::VectorXd& v, char sep) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_double(v[i]);
  }
  return s;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write '" + path.string() + "'");
  f << text;
}

// Synthetic experiment data: LHS design of `total` points, GP outputs, and a
// seeded split into train (ceil half) and test rows.
struct Synthetic {
  DesignMatrix design;
  OutputMatrix output;
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

Synthetic synthesize(int total, int p, int k, const KernelSpec& truth, double sigma2, std::uint64_t seed) {
  Synthetic s;
  s.design = lhs_sample(total, p, seed);
  s.output = sample_gp(s.design, truth, sigma2, k, seed + 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed + 2);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>((total + 1) / 2);
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

KernelSpec truth_spec(const std::string& kernel, std::vector<double> ranges, int p) {
  KernelSpec spec;
  spec.kernel = parse_kernel(kernel);
  if (ranges.empty()) {
    if (p == 4) ranges = {0.5, 0.8, 1.2, 0.3};
    else ranges.assign(static_cast<std::size_t>(p), 0.5);
  }
  if (static_cast<int>(ranges.size()) != p) {
    throw InvalidParameter("--ranges needs " + std::to_string(p) + " values");
  }
  spec.ranges = to_vector(ranges);
  spec.validate();
  return spec;
}

struct FitFlags {
  std::string kernel = "matern32";
  std::string trend = "constant";
  std::string method = "vecchia";
  int m = 30;
  std::string prior = "jr";
  double prior_a = 0.2;
  double nugget = 0.0;
  bool estimate_nugget = false;
  double fraction = 1.0;
  std::uint64_t output_seed = 0;
  int scaling_rounds = 2;
  bool allow_nonconvergence = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kernel", kernel, "matern32, matern52 or pow_exp:<alpha>")->capture_default_str();
    cmd->add_option("--trend", trend, "none, constant or linear")->capture_default_str();
    cmd->add_option("--method", method, "vecchia or exact")
        ->check(CLI::IsMember({"vecchia", "exact"}))
        ->capture_default_str();
    cmd->add_option("--m", m, "conditioning-set size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--prior", prior, "jr or none")->check(CLI::IsMember({"jr", "none"}))->capture_default_str();
    cmd->add_option("--prior-a", prior_a, "jointly robust prior a")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--nugget", nugget, "fixed nugget ratio, or the start when estimated")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--estimate-nugget", estimate_nugget, "estimate the nugget ratio");
    cmd->add_option("--fraction", fraction, "fraction of outputs used for the ranges")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--output-seed", output_seed, "seed for the output subsample");
    cmd->add_option("--scaling-rounds", scaling_rounds, "plan rebuilds")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_flag("--allow-nonconvergence", allow_nonconvergence, "keep the best seed even if none converged");
  }

  [[nodiscard]] FitOptions options() const {
    FitOptions o;
    o.method = parse_method(method);
    o.m = m;
    o.prior = prior == "jr" ? PriorKind::JointlyRobust : PriorKind::None;
    o.prior_a = prior_a;
    o.nugget = nugget;
    o.estimate_nugget = estimate_nugget;
    o.output_fraction = fraction;
    o.output_seed = output_seed;
    o.scaling_rounds = scaling_rounds;
    o.require_convergence = !allow_nonconvergence;
    return o;
  }
};

int converged_seeds(const FittedEmulator& model) {
  return static_cast<int>(std::count_if(model.diagnostics.seeds.begin(), model.diagnostics.seeds.end(),
                                        [](const SeedReport& s) { return s.converged; }));
}

// ---- gen ----

struct GenFlags {
  int n = 200;
  int p = 4;
  int k = 1;
  std::vector<double> ranges;
  std::string kernel = "matern32";
  double sigma2 = 1.0;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
  const KernelSpec truth = truth_spec(f.kernel, f.ranges, f.p);
  if (f.n < 2) throw InvalidParameter("--n must be at least 2");
  const Synthetic s = synthesize(f.n, f.p, f.k, truth, f.sigma2, f.seed);
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  const auto xh = numbered_header("x", f.p);
  const auto yh = numbered_header("y", f.k);
  write_csv((dir / "design.csv").string(), xh, s.design.points);
  write_csv((dir / "output.csv").string(), yh, s.output.values);
  write_csv((dir / "train_design.csv").string(), xh, rows_of(s.design.points, s.train));
  write_csv((dir / "train_output.csv").string(), yh, rows_of(s.output.values, s.train));
  write_csv((dir / "test_design.csv").string(), xh, rows_of(s.design.points, s.test));
  write_csv((dir / "test_output.csv").string(), yh, rows_of(s.output.values, s.test));
  write_index_file((dir / "train_index.csv").string(), s.train);
  write_index_file((dir / "test_index.csv").string(), s.test);
  out << "wrote " << s.train.size() << " train and " << s.test.size() << " test rows (" << f.k
      << " outputs) to " << dir.string() << "\n";
  return kOk;
}

// ---- fit ----

struct FitCmdFlags {
  std::string design;
  std::string output;
  std::string model = "model.json";
  std::string report;
  std::string dump_plan;
  FitFlags fit;
};

int cmd_fit(const FitCmdFlags& f, std::ostream& out) {
  const Table x = read_csv(f.design);
  const Table y = read_csv(f.output);
  if (x.values.rows() != y.values.rows()) {
    throw ShapeError("design has " + std::to_string(x.values.rows()) + " rows, outputs have " +
                     std::to_string(y.values.rows()));
  }
  FitOptions opts = f.fit.options();
  if (opts.method == FitMethod::Vecchia && opts.m >= x.values.rows()) {
    throw InvalidParameter("--m must be below the number of training rows (" + std::to_string(x.values.rows()) + ")");
  }
  const auto start = std::chrono::steady_clock::now();
  FittedEmulator model = fit(DesignMatrix::from_points(x.values), OutputMatrix{y.values},
                             parse_kernel(f.fit.kernel), parse_trend(f.fit.trend), opts);
  const double wall = seconds_since(start);
  model.design_path = fs::absolute(f.design).string();
  model.output_path = fs::absolute(f.output).string();
  save_model(f.model, model);
  if (!f.dump_plan.empty()) {
    if (!model.plan) throw InvalidParameter("--dump-plan needs --method vecchia");
    write_text(f.dump_plan, plan_to_json(*model.plan).dump(2) + "\n");
  }
  const int conv = converged_seeds(model);
  const std::string header = "n,m,k,method,fit_seconds,objective,ranges,converged_seeds,seeds\n";
  std::ostringstream row;
  row << model.n() << ',' << (model.method == FitMethod::Vecchia ? model.m : 0) << ',' << model.outputs() << ','
      << to_string(model.method) << ',' << format_double(wall) << ',' << format_double(model.diagnostics.objective)
      << ',' << join(model.spec.ranges, ';') << ',' << conv << ',' << model.diagnostics.seeds.size() << '\n';
  if (!f.report.empty()) write_text(f.report, header + row.str());
  out << "fit " << to_string(model.method) << " n=" << model.n() << " k=" << model.outputs()
      << " ranges=" << join(model.spec.ranges, ',') << " converged_seeds=" << conv << "/"
      << model.diagnostics.seeds.size() << " fit_seconds=" << format_double(wall) << "\n";
  return kOk;
}

// ---- predict ----

struct PredictFlags {
  std::string model;
  std::string design;
  std::string truth;
  std::string out_dir = ".";
  Eigen::Index m_pred = 0;
  bool weights = false;
  bool compare_full = false;
  double interval = 0.0;
};

int cmd_predict(const PredictFlags& f, std::ostream& out) {
  const FittedEmulator model = load_model(f.model);
  const Table xt = read_csv(f.design);
  if (xt.values.cols() != model.dims()) {
    throw ShapeError("test design has " + std::to_string(xt.values.cols()) + " columns, model expects " +
                     std::to_string(model.dims()));
  }
  std::optional<Table> truth;
  if (!f.truth.empty()) {
    if (!fs::exists(f.truth)) {
      out << "truth file '" << f.truth << "' not found; metrics omitted\n";
    } else {
      truth = read_csv(f.truth);
      if (truth->values.rows() != xt.values.rows() || truth->values.cols() != model.outputs()) {
        throw ShapeError("truth must have one row per test input and one column per output");
      }
    }
  }
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);

  auto run = [&](Eigen::Index m_pred, double& secs) {
    const auto start = std::chrono::steady_clock::now();
    const Predictor pr(model);
    PredictionBatch b = m_pred > 0 ? pr.predict_nn(xt.values, m_pred) : pr.predict_exact(xt.values);
    secs = seconds_since(start);
    return b;
  };
  double secs = 0.0;
  const PredictionBatch batch = run(f.m_pred, secs);
  const auto yh = numbered_header("y", model.outputs());
  write_csv((dir / "pred_mean.csv").string(), yh, batch.mean);
  write_csv((dir / "pred_sd.csv").string(), yh, batch.sd());
  if (f.interval > 0.0) {
    const Interval iv = predictive_interval(batch, f.interval);
    write_csv((dir / "pred_lower.csv").string(), yh, iv.lower);
    write_csv((dir / "pred_upper.csv").string(), yh, iv.upper);
  }
  if (f.weights) {
    const Predictor pr(model);
    Eigen::MatrixXd w(xt.values.rows(), model.n());
    for (Eigen::Index t = 0; t < w.rows(); ++t) w.row(t) = pr.ppe_weights(xt.values.row(t).transpose()).transpose();
    write_csv((dir / "weights.csv").string(), numbered_header("w", model.n()), w);
  }

  std::string header = "m_pred,predict_seconds";
  std::string row = std::to_string(f.m_pred) + "," + format_double(secs);
  out << "predicted " << batch.mean.rows() << " inputs, m_pred=" << (f.m_pred > 0 ? std::to_string(f.m_pred) : "all")
      << " predict_seconds=" << format_double(secs) << "\n";
  if (truth) {
    const double e = rmse(batch.mean, truth->values);
    const double r = relative_rmse(batch.mean, truth->values);
    header += ",rmse,relative_rmse";
    row += "," + format_double(e) + "," + format_double(r);
    out << "rmse=" << format_double(e) << " relative_rmse=" << format_double(r) << "\n";
  }
  if (f.compare_full && f.m_pred > 0) {
    double full_secs = 0.0;
    const PredictionBatch full = run(0, full_secs);
    header += ",full_predict_seconds,speedup";
    row += "," + format_double(full_secs) + "," + format_double(full_secs / secs);
    out << "full_predict_seconds=" << format_double(full_secs) << " speedup=" << format_double(full_secs / secs) << "\n";
    if (truth) {
      const double e = rmse(full.mean, truth->values);
      header += ",full_rmse";
      row += "," + format_double(e);
      out << "full_rmse=" << format_double(e) << "\n";
    }
  }
  write_text(dir / "metrics.csv", header + "\n" + row + "\n");
  return kOk;
}

// ---- reshape ----

struct ReshapeFlags {
  std::string design;
  std::string output;
  std::string coord;
  std::string mode = "full";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_reshape(const ReshapeFlags& f, std::ostream& out) {
  const Table x = read_csv(f.design);
  const Table y = read_csv(f.output);
  const Table c = read_csv(f.coord);
  if (c.values.cols() != 1) throw ShapeError("coordinate file must have exactly one column");
  const Reshaped r = reshape_space_as_input(x.values, y.values, c.values.col(0),
                                            f.mode == "full" ? ReshapeMode::Full : ReshapeMode::Sampled, f.seed);
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> xh = x.header;
  xh.push_back(c.header.front());
  write_csv((dir / "reshaped_design.csv").string(), xh, r.design);
  write_csv((dir / "reshaped_output.csv").string(), {"y"}, r.output);
  write_index_file((dir / "reshaped_column.csv").string(), r.column);
  out << "reshaped " << x.values.rows() << " runs x " << y.values.cols() << " outputs into " << r.design.rows()
      << " rows with " << r.design.cols() << " inputs\n";
  return kOk;
}

// ---- bench ----

struct BenchFlags {
  std::vector<int> ns;
  std::vector<int> ms;
  int m = 30;
  int n_fixed = 1600;
  int k = 1;
  int p = 4;
  std::vector<double> ranges;
  std::string kernel = "matern32";
  std::vector<std::string> methods{"vecchia", "exact"};
  std::uint64_t seed = 1;
  Eigen::Index m_pred = 0;
  std::string out = "bench.csv";
};

struct BenchRow {
  int n = 0;
  int m = 0;
  FitMethod method = FitMethod::Vecchia;
  double fit_seconds = 0.0;
  double predict_seconds = 0.0;
  double rmse = 0.0;
  double relative_rmse = 0.0;
  Eigen::VectorXd ranges;
  int converged = 0;
  int seeds = 0;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  if (f.ns.empty() && f.ms.empty()) throw InvalidParameter("bench needs a non-empty --ns or --ms sweep");
  const KernelSpec truth = truth_spec(f.kernel, f.ranges, f.p);
  std::vector<std::pair<int, int>> configs;
  for (int n : f.ns) configs.emplace_back(n, f.m);
  for (int m : f.ms) configs.emplace_back(f.n_fixed, m);

  std::map<int, Synthetic> data;
  std::map<int, BenchRow> exact_cache;
  std::vector<BenchRow> rows;
  for (const auto& [n, m] : configs) {
    if (n < 2) throw InvalidParameter("bench sizes must be at least 2");
    auto it = data.find(n);
    if (it == data.end()) it = data.emplace(n, synthesize(2 * n, f.p, f.k, truth, 1.0, f.seed + static_cast<std::uint64_t>(n))).first;
    const Synthetic& s = it->second;
    const DesignMatrix train = DesignMatrix::from_points(rows_of(s.design.points, s.train));
    const OutputMatrix ytrain{rows_of(s.output.values, s.train)};
    const Eigen::MatrixXd xtest = rows_of(s.design.points, s.test);
    const Eigen::MatrixXd ytest = rows_of(s.output.values, s.test);
    for (const std::string& name : f.methods) {
      const FitMethod method = parse_method(name);
      if (method == FitMethod::Exact) {
        if (const auto c = exact_cache.find(n); c != exact_cache.end()) {
          BenchRow row = c->second;
          row.m = m;
          rows.push_back(row);
          continue;
        }
      }
      FitOptions o;
      o.method = method;
      o.m = std::min(m, n - 1);
      o.require_convergence = false;
      BenchRow row;
      row.n = n;
      row.m = m;
      row.method = method;
      auto start = std::chrono::steady_clock::now();
      const FittedEmulator model = fit(train, ytrain, truth.kernel, TrendBasis{}, o);
      row.fit_seconds = seconds_since(start);
      start = std::chrono::steady_clock::now();
      const Predictor pr(model);
      const PredictionBatch b = f.m_pred > 0 ? pr.predict_nn(xtest, std::min<Eigen::Index>(f.m_pred, model.n()))
                                             : pr.predict_exact(xtest);
      row.predict_seconds = seconds_since(start);
      row.rmse = rmse(b.mean, ytest);
      row.relative_rmse = relative_rmse(b.mean, ytest);
      row.ranges = model.spec.ranges;
      row.converged = converged_seeds(model);
      row.seeds = static_cast<int>(model.diagnostics.seeds.size());
      if (method == FitMethod::Exact) exact_cache[n] = row;
      rows.push_back(row);
      out << "n=" << n << " m=" << m << " " << name << " fit_seconds=" << format_double(row.fit_seconds)
          << " relative_rmse=" << format_double(row.relative_rmse) << "\n";
    }
  }
  std::string csv = "n,m,k,method,fit_seconds,predict_seconds,rmse,relative_rmse,ranges,converged_seeds,seeds\n";
  for (const BenchRow& r : rows) {
    csv += std::to_string(r.n) + "," + std::to_string(r.m) + "," + std::to_string(f.k) + "," + to_string(r.method) +
           "," + format_double(r.fit_seconds) + "," + format_double(r.predict_seconds) + "," + format_double(r.rmse) +
           "," + format_double(r.relative_rmse) + "," + join(r.ranges, ';') + "," + std::to_string(r.converged) + "," +
           std::to_string(r.seeds) + "\n";
  }
  write_text(f.out, csv);
  out << "wrote " << rows.size() << " rows to " << f.out << "\n";
  return kOk;
}

// ---- gradcheck ----

struct GradcheckFlags {
  int instances = 100;
  std::uint64_t seed = 1;
  double tol = 1e-5;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  std::mt19937_64 rng(f.seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto integer = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
  double worst = 0.0;
  int skipped = 0;
  for (int t = 0; t < f.instances;) {
    const int n = integer(6, 100);
    const int p = integer(1, 4);
    const int choices[3] = {3, 10, n - 1};
    const int m = std::min(choices[t % 3], n - 1);
    const DesignMatrix d = lhs_sample(n, p, rng());
    Eigen::MatrixXd y(n, 1);
    const Eigen::VectorXd freq = Eigen::VectorXd::NullaryExpr(p, [&] { return uniform(0.5, 3.0); });
    for (int i = 0; i < n; ++i) y(i, 0) = std::sin(d.points.row(i).dot(freq));
    KernelSpec spec;
    const int fam = integer(0, 2);
    spec.kernel = fam == 0   ? Kernel{KernelFamily::Matern32, 2.0}
                  : fam == 1 ? Kernel{KernelFamily::Matern52, 2.0}
                             : Kernel{KernelFamily::PowerExponential, uniform(1.0, 2.0)};
    spec.ranges = Eigen::VectorXd::NullaryExpr(p, [&] { return uniform(0.1, 0.8); });
    // Finite differences are meaningless once roundoff in R dominates.
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                    correlation_matrix(spec, d.points), Eigen::EigenvaluesOnly)
                                    .eigenvalues();
    if (!(eig[0] > 0.0) || eig[n - 1] / eig[0] > 1e8) {
      ++skipped;
      continue;
    }
    ++t;
    const ConditioningPlan plan = build_plan(d, m, default_scale(d));
    const VecchiaModel vm(d.points, y, plan, TrendBasis{});
    const PriorSpec prior = default_jr_prior(d.points);
    const Eigen::VectorXd grad = vm.evaluate(spec, prior, GradientMode::Ranges).grad;
    Eigen::VectorXd fd(p);
    for (int l = 0; l < p; ++l) {
      // Five-point central stencil with a relative step of 1e-3.
      const double h = 1e-3 * spec.ranges[l];
      auto at = [&](double step) {
        KernelSpec s = spec;
        s.ranges[l] += step;
        return vm.evaluate(s, prior).neg2log;
      };
      fd[l] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
    worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
  }
  out << "instances=" << f.instances << " skipped_ill_conditioned=" << skipped << " max_relative_error=" << format_double(worst) << "\n";
  return worst <= f.tol ? kOk : kNumerical;
}

int exit_code(const Error& e) {
  if (dynamic_cast<const InvalidParameter*>(&e)) return kUsage;
  if (dynamic_cast<const ConditioningError*>(&e) || dynamic_cast<const FitError*>(&e)) return kNumerical;
  return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vecchia parallel partial emulator"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "simulate a GP experiment with a train/test split");
  gen_cmd->add_option("--n", gen.n, "total runs (split evenly)")->capture_default_str();
  gen_cmd->add_option("--p", gen.p, "input dimension")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--k", gen.k, "output columns")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--ranges", gen.ranges, "true ranges")->delimiter(',');
  gen_cmd->add_option("--kernel", gen.kernel)->capture_default_str();
  gen_cmd->add_option("--sigma2", gen.sigma2)->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir)->capture_default_str();

  FitCmdFlags fitf;
  CLI::App* fit_cmd = app.add_subcommand("fit", "estimate an emulator and write the model file");
  fit_cmd->add_option("--design", fitf.design, "training design CSV")->required();
  fit_cmd->add_option("--output", fitf.output, "training output CSV")->required();
  fit_cmd->add_option("--model", fitf.model, "model JSON to write")->capture_default_str();
  fit_cmd->add_option("--report", fitf.report, "CSV row with timing and diagnostics");
  fit_cmd->add_option("--dump-plan", fitf.dump_plan, "write the final conditioning plan as JSON");
  fitf.fit.attach(fit_cmd);

  PredictFlags pred;
  CLI::App* pred_cmd = app.add_subcommand("predict", "predict at test inputs");
  pred_cmd->add_option("--model", pred.model)->required();
  pred_cmd->add_option("--design", pred.design, "test design CSV")->required();
  pred_cmd->add_option("--truth", pred.truth, "true test outputs for RMSE");
  pred_cmd->add_option("--out-dir", pred.out_dir)->capture_default_str();
  pred_cmd->add_option("--m-pred", pred.m_pred, "nearest neighbours per prediction (0 = all)")
      ->check(CLI::NonNegativeNumber);
  pred_cmd->add_flag("--weights", pred.weights, "also write weights.csv");
  pred_cmd->add_flag("--compare-full", pred.compare_full, "also time full prediction");
  pred_cmd->add_option("--interval", pred.interval, "write predictive intervals at this level")
      ->check(CLI::Range(0.0, 1.0));

  ReshapeFlags rs;
  CLI::App* rs_cmd = app.add_subcommand("reshape", "treat the output coordinate as an extra input");
  rs_cmd->add_option("--design", rs.design)->required();
  rs_cmd->add_option("--output", rs.output)->required();
  rs_cmd->add_option("--coord", rs.coord, "one-column CSV with the coordinate of each output")->required();
  rs_cmd->add_option("--mode", rs.mode)->check(CLI::IsMember({"full", "sampled"}))->capture_default_str();
  rs_cmd->add_option("--seed", rs.seed);
  rs_cmd->add_option("--out-dir", rs.out_dir)->capture_default_str();

  BenchFlags bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "sweep n and m over both methods");
  bench_cmd->add_option("--ns", bench.ns, "training sizes at fixed --m")->delimiter(',');
  bench_cmd->add_option("--ms", bench.ms, "conditioning sizes at --n-fixed")->delimiter(',');
  bench_cmd->add_option("--m", bench.m)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--n-fixed", bench.n_fixed)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--k", bench.k)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--p", bench.p)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--ranges", bench.ranges)->delimiter(',');
  bench_cmd->add_option("--kernel", bench.kernel)->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods)->delimiter(',')->check(CLI::IsMember({"vecchia", "exact"}));
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  bench_cmd->add_option("--m-pred", bench.m_pred)->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--out", bench.out)->capture_default_str();

  GradcheckFlags gc;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "compare the analytic gradient with finite differences");
  gc_cmd->add_option("--instances", gc.instances)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--tol", gc.tol)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  set_thread_count(threads);
  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*fit_cmd) return cmd_fit(fitf, out);
    if (*pred_cmd) return cmd_predict(pred, out);
    if (*rs_cmd) return cmd_reshape(rs, out);
    if (*bench_cmd) return cmd_bench(bench, out);
    if (*gc_cmd) return cmd_gradcheck(gc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace vppe::cli
