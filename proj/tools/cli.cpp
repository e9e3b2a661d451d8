#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vcflr/data.hpp"
#include "vcflr/error.hpp"
#include "vcflr/experiment.hpp"
#include "vcflr/model_io.hpp"
#include "vcflr/regression.hpp"
#include "vcflr/selection.hpp"
#include "vcflr/simulation.hpp"

namespace vcflr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitFormat = 4;
constexpr int kExitNumerical = 5;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::invalid_interval: return kExitUsage;
    case ErrorKind::parse_error:
    case ErrorKind::domain_violation:
    case ErrorKind::empty_bin:
    case ErrorKind::uncovered_subject:
    case ErrorKind::covariate_out_of_domain:
    case ErrorKind::io_error: return kExitData;
    case ErrorKind::format_error: return kExitFormat;
    default: return kExitNumerical;
  }
}

// Raised for bad flag or config values; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct RunConfig {
  DatasetSchema schema{{0.0, 10.0}, {0.0, 10.0}, {0.0, 1.0}, false};
  FitConfig fit;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: all hardware threads
};

Domain domain_from(const json& j, const char* key) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2 || !(v[0] < v[1])) throw UsageError(std::string(key) + " must be [lower, upper] with lower < upper");
  return {v[0], v[1]};
}

bool is_auto(const json& j) { return j.is_string() && j.get<std::string>() == "auto"; }

template <class T>
T positive(const json& j, const char* key) {
  const T v = j.get<T>();
  if (!(v > T{0})) throw UsageError(std::string(key) + " must be positive");
  return v;
}

// Applies a JSON config document on top of `cfg`. Unknown keys are errors
// so that typos do not silently fall back to defaults.
void apply_config(const json& doc, RunConfig& cfg) {
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  FitConfig& fit = cfg.fit;
  for (const auto& [key, val] : doc.items()) {
    if (key == "s_domain") cfg.schema.s_domain = domain_from(val, "s_domain");
    else if (key == "t_domain") cfg.schema.t_domain = domain_from(val, "t_domain");
    else if (key == "z_domain") cfg.schema.z_domain = domain_from(val, "z_domain");
    else if (key == "scalar_response") cfg.schema.scalar_response = val.get<bool>();
    else if (key == "s_points") fit.s_points = positive<std::size_t>(val, "s_points");
    else if (key == "t_points") fit.t_points = positive<std::size_t>(val, "t_points");
    else if (key == "bins") {
      if (is_auto(val)) {
        fit.bins.count.reset();
        fit.bins.centers.clear();
      } else if (val.is_number_integer()) {
        fit.bins.count = positive<std::size_t>(val, "bins");
      } else if (val.is_object()) {
        fit.bins.centers = val.at("centers").get<std::vector<double>>();
        fit.bins.width = positive<double>(val.at("width"), "bins.width");
      } else {
        throw UsageError("bins must be \"auto\", a count, or {centers, width}");
      }
    } else if (key == "bin_candidates") fit.bins.candidates = val.get<std::vector<std::size_t>>();
    else if (key == "M") fit.M = is_auto(val) ? std::nullopt : std::optional(positive<std::size_t>(val, "M"));
    else if (key == "K") fit.K = is_auto(val) ? std::nullopt : std::optional(positive<std::size_t>(val, "K"));
    else if (key == "max_components") fit.max_components = positive<std::size_t>(val, "max_components");
    else if (key == "joint_truncation") fit.joint_truncation = val.get<bool>();
    else if (key == "refine_bandwidth") {
      fit.refine_bandwidth = is_auto(val) ? std::nullopt : std::optional(positive<double>(val, "refine_bandwidth"));
    } else if (key == "smoother_bandwidths") {
      if (is_auto(val)) {
        fit.smoother_bandwidths.reset();
      } else {
        BinBandwidths bw;
        bw.mean_x = positive<double>(val.at("mean_x"), "mean_x");
        bw.mean_y = positive<double>(val.at("mean_y"), "mean_y");
        bw.cov_x = positive<double>(val.at("cov_x"), "cov_x");
        bw.cov_y = positive<double>(val.at("cov_y"), "cov_y");
        bw.var_x = positive<double>(val.at("var_x"), "var_x");
        bw.var_y = positive<double>(val.at("var_y"), "var_y");
        bw.cross_s = positive<double>(val.at("cross_s"), "cross_s");
        bw.cross_t = val.contains("cross_t") ? positive<double>(val.at("cross_t"), "cross_t") : bw.cross_s;
        fit.smoother_bandwidths = bw;
      }
    } else if (key == "cross_validate") fit.cross_validate = val.get<bool>();
    else if (key == "cv_folds") fit.cv_folds = positive<std::size_t>(val, "cv_folds");
    else if (key == "criterion") fit.criterion = parse_criterion(val.get<std::string>());
    else if (key == "binwidth_criterion") fit.binwidth_criterion = parse_criterion(val.get<std::string>());
    else if (key == "kernel") fit.kernel.family = parse_kernel_family(val.get<std::string>());
    else if (key == "min_occupancy") fit.min_occupancy = positive<std::size_t>(val, "min_occupancy");
    else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
    else if (key == "threads") cfg.threads = val.get<std::size_t>();
    else throw UsageError("unknown config key '" + key + "'");
  }
  const Domain& zd = cfg.schema.z_domain;
  for (const double c : fit.bins.centers) {
    if (!zd.contains(c)) throw UsageError("bin center " + shortest(c) + " lies outside z_domain");
  }
  if (fit.refine_bandwidth && *fit.refine_bandwidth > 10.0 * zd.length()) {
    throw UsageError("refine_bandwidth is implausibly large for z_domain");
  }
}

json config_json(const RunConfig& cfg) {
  const auto& s = cfg.schema;
  json j = {{"s_domain", {s.s_domain.lower, s.s_domain.upper}},
            {"t_domain", {s.t_domain.lower, s.t_domain.upper}},
            {"z_domain", {s.z_domain.lower, s.z_domain.upper}},
            {"scalar_response", s.scalar_response},
            {"s_points", cfg.fit.s_points},
            {"t_points", cfg.fit.t_points},
            {"criterion", to_string(cfg.fit.criterion)},
            {"binwidth_criterion", to_string(cfg.fit.binwidth_criterion)},
            {"kernel", to_string(cfg.fit.kernel.family)},
            {"seed", cfg.seed}};
  if (cfg.fit.bins.count) j["bins"] = *cfg.fit.bins.count;
  else j["bins"] = "auto";
  return j;
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  apply_config(doc, cfg);
  return cfg;
}

fs::path output_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  return out;
}

void write_truth(const fs::path& dir, const std::string& prefix, const SimTruth& truth, bool curves) {
  if (curves) {
    auto out = open_out(dir / (prefix + "_truth.csv"));
    out << "subject_id,time,value\n";
    for (std::size_t i = 0; i < truth.ids.size(); ++i) {
      const auto& f = truth.response[i];
      for (Eigen::Index j = 0; j < f.values.size(); ++j) {
        out << truth.ids[i] << ',' << shortest(f.grid.abscissae[j]) << ',' << shortest(f.values[j]) << '\n';
      }
    }
  }
  auto out = open_out(dir / (prefix + "_scores.csv"));
  out << "subject_id,z,zeta1,zeta2,zeta3\n";
  for (std::size_t i = 0; i < truth.ids.size(); ++i) {
    out << truth.ids[i] << ',' << shortest(truth.z[i]);
    for (const double v : truth.zeta[i]) out << ',' << shortest(v);
    out << '\n';
  }
}

void write_beta(const fs::path& path, const FittedModel& model, double z) {
  const RefinedEstimate est = refine(model, z);
  auto out = open_out(path);
  out << "s,t,beta\n";
  for (Eigen::Index r = 0; r < est.beta.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < est.beta.values.cols(); ++c) {
      out << shortest(model.s_grid.abscissae[r]) << ',' << shortest(model.t_grid.abscissae[c]) << ','
          << shortest(est.beta.values(r, c)) << '\n';
    }
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--threads", c.threads, "worker threads (1 = reference order)");
  cmd->add_option("--out", c.out, "output directory");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  cfg.fit.threads = cfg.threads;
  return cfg;
}

SimDesign design_for(const std::string& example) {
  SimDesign d;
  d.sampling = parse_sampling(example);
  return d;
}

int cmd_simulate(const Common& common, const std::string& example, std::size_t n, std::size_t n_test,
                 std::ostream& out) {
  RunConfig cfg = resolve(common);
  const SimDesign design = design_for(example);
  cfg.schema = {{SimDesign::lower, SimDesign::upper}, {SimDesign::lower, SimDesign::upper}, {0.0, 1.0}, false};
  const fs::path dir = output_dir(common.out);
  const Grid truth_grid = make_grid(SimDesign::lower, SimDesign::upper, cfg.fit.t_points);
  const SimData train = generate(design, n, cfg.seed, truth_grid);
  const SimData test = generate_test(design, n_test, cfg.seed, truth_grid);
  save_csv(dir / "train.csv", train.data);
  save_csv(dir / "test.csv", test.data);
  write_truth(dir, "train", train.truth, false);
  write_truth(dir, "test", test.truth, true);
  open_out(dir / "config.json") << config_json(cfg).dump(2) << '\n';
  out << "wrote " << n << " training and " << n_test << " test subjects to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_fit(const Common& common, const std::string& train_path, bool global, std::optional<std::size_t> bins,
            const std::string& criterion, std::ostream& out) {
  RunConfig cfg = resolve(common);
  if (bins) {
    if (*bins == 0) throw UsageError("--bins must be positive");
    cfg.fit.bins.count = *bins;
    cfg.fit.bins.centers.clear();
  }
  if (!criterion.empty()) cfg.fit.criterion = parse_criterion(criterion);
  const LongitudinalDataset ds = load_csv(train_path, cfg.schema);
  const FittedModel model = global ? fit_global(ds, cfg.fit) : fit(ds, cfg.fit);
  const fs::path dir = output_dir(common.out);
  save_model(dir / "model.json", model);
  auto report = open_out(dir / "selection.csv");
  write_report_csv(report, model.report);
  out << (global ? "global" : "varying-coefficient") << " model: P=" << model.bins.size() << " M=" << model.M
      << " K=" << model.K << " b=" << shortest(model.refine.bandwidth) << '\n';
  return kExitOk;
}

int cmd_predict(const Common& common, const std::string& model_path, const std::string& data_path,
                std::ostream& out, std::ostream& err) {
  resolve(common);
  const FittedModel model = load_model(model_path);
  DatasetSchema schema;
  schema.s_domain = {model.s_grid.lower, model.s_grid.upper};
  schema.t_domain = model.scalar_response ? Domain{0.0, 1.0} : Domain{model.t_grid.lower, model.t_grid.upper};
  schema.z_domain = model.z_domain;
  schema.scalar_response = model.scalar_response;
  // Subjects outside the model's covariate range are skipped, not fatal, so
  // the data are read with an unbounded z domain.
  schema.z_domain = {-std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  const LongitudinalDataset ds = load_csv(data_path, schema);

  const fs::path dir = output_dir(common.out);
  auto csv = open_out(dir / "predictions.csv");
  csv << (model.scalar_response ? "subject_id,y_hat\n" : "subject_id,time,y_hat\n");
  std::vector<std::string> skipped;
  for (const auto& s : ds.subjects) {
    Prediction p;
    try {
      p = predict(model, s.x_obs, s.z);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::covariate_out_of_domain && e.kind() != ErrorKind::invalid_argument) throw;
      err << "warning: subject " << s.id << " skipped: " << e.what() << '\n';
      skipped.push_back(s.id);
      continue;
    }
    if (model.scalar_response) {
      csv << s.id << ',' << shortest(p.y_hat.values[0]) << '\n';
    } else {
      for (Eigen::Index j = 0; j < p.y_hat.values.size(); ++j) {
        csv << s.id << ',' << shortest(model.t_grid.abscissae[j]) << ',' << shortest(p.y_hat.values[j]) << '\n';
      }
    }
  }
  if (!skipped.empty()) {
    err << skipped.size() << " subject(s) skipped:";
    for (const auto& id : skipped) err << ' ' << id;
    err << '\n';
  }
  out << "predicted " << ds.size() - skipped.size() << " of " << ds.size() << " subjects\n";
  return kExitOk;
}

int cmd_evaluate(const Common& common, const std::string& example, std::size_t n, std::size_t n_test,
                 std::size_t reps, const std::vector<double>& dump_z, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(common);
  ExperimentConfig exp;
  exp.design = design_for(example);
  exp.n_train = n;
  exp.n_test = n_test;
  exp.reps = reps;
  exp.seed = cfg.seed;
  exp.fit = cfg.fit;
  const fs::path dir = output_dir(common.out);
  auto csv = open_out(dir / "mispe.csv");
  csv << "rep,model,mispe\n";
  std::size_t failures = 0;
  bool dumped = false;
  double sum_g = 0, sum_v = 0, sq_g = 0, sq_v = 0;
  run_experiment(exp, [&](const RepResult& r) {
    if (!r.ok) {
      ++failures;
      err << "rep " << r.rep << " failed: " << r.error << '\n';
      return;
    }
    csv << r.rep << ",global," << shortest(r.mispe_global) << '\n';
    csv << r.rep << ",varying," << shortest(r.mispe_varying) << '\n';
    csv.flush();
    sum_g += r.mispe_global;
    sum_v += r.mispe_varying;
    sq_g += r.mispe_global * r.mispe_global;
    sq_v += r.mispe_varying * r.mispe_varying;
    if (!dumped) {
      for (const double z : dump_z) write_beta(dir / ("beta_z" + shortest(z) + ".csv"), r.varying, z);
      dumped = true;
    }
  });
  const double ok = static_cast<double>(reps - failures);
  if (ok > 0) {
    auto sd = [ok](double sum, double sq) {
      return ok > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / ok) / (ok - 1))) : 0.0;
    };
    out << "global  MISPE mean " << sum_g / ok << " sd " << sd(sum_g, sq_g) << '\n';
    out << "varying MISPE mean " << sum_v / ok << " sd " << sd(sum_v, sq_v) << '\n';
  }
  if (static_cast<double>(failures) > 0.2 * static_cast<double>(reps)) {
    err << failures << " of " << reps << " repetitions failed\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Varying-coefficient functional linear regression for sparse longitudinal data", "vcflr"};
  app.require_subcommand(1);

  Common common;
  std::string example;
  std::size_t n = 400, n_test = 200, reps = 10;
  std::string train_path, model_path, data_path, criterion;
  bool global = false;
  std::optional<std::size_t> bins;
  std::vector<double> dump_z{0.25, 0.5, 0.75};

  auto* sim = app.add_subcommand("simulate", "generate training and test data");
  add_common(sim, common);
  sim->add_option("--example", example, "regular or sparse")->required();
  sim->add_option("--n", n, "training subjects");
  sim->add_option("--n-test", n_test, "test subjects");

  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a training CSV");
  add_common(fit_cmd, common);
  fit_cmd->add_option("--train", train_path, "training CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_flag("--global", global, "fit the non-varying baseline");
  fit_cmd->add_option("--bins", bins, "fixed number of covariate bins");
  fit_cmd->add_option("--criterion", criterion, "aic or bic for truncation and refinement bandwidth");

  auto* pred = app.add_subcommand("predict", "predict responses from a fitted model");
  add_common(pred, common);
  pred->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  pred->add_option("--data", data_path, "CSV with predictor rows")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "repeat simulate, fit and score");
  add_common(eval, common);
  eval->add_option("--example", example, "regular or sparse")->required();
  eval->add_option("--n", n, "training subjects");
  eval->add_option("--n-test", n_test, "test subjects");
  eval->add_option("--reps", reps, "repetitions");
  eval->add_option("--dump-z", dump_z, "covariate values for slope dumps");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common, example, n, n_test, out);
    if (fit_cmd->parsed()) return cmd_fit(common, train_path, global, bins, criterion, out);
    if (pred->parsed()) return cmd_predict(common, model_path, data_path, out, err);
    return cmd_evaluate(common, example, n, n_test, reps, dump_z, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EmptyBinError& e) {
    err << "error: " << e.what() << " (bin index " << e.bin() << ")\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: configuration value has the wrong type: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace vcflr::cli
