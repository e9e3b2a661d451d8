#include "vcflr/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vcflr/error.hpp"
#include "vcflr/parallel.hpp"
#include "vcflr/selection.hpp"

namespace vcflr {

GridSurface raw_beta(const BinEstimate& bin, std::size_t M, std::size_t K) {
  if (M > bin.eig_x.size() || K > bin.eig_y.size() || M > static_cast<std::size_t>(bin.sigma_mk.rows()) ||
      K > static_cast<std::size_t>(bin.sigma_mk.cols())) {
    throw Error(ErrorKind::truncation_too_large, "raw slope needs " + std::to_string(M) + "x" + std::to_string(K) +
                                                     " components, bin has " + std::to_string(bin.eig_x.size()) +
                                                     "x" + std::to_string(bin.eig_y.size()));
  }
  GridSurface out(bin.cross_cov.rows, bin.cross_cov.cols);
  for (std::size_t m = 0; m < M; ++m) {
    const double rho = bin.eig_x.values[static_cast<Eigen::Index>(m)];
    for (std::size_t k = 0; k < K; ++k) {
      const double coef = bin.sigma_mk(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) / rho;
      out.values.noalias() += coef * bin.eig_x.functions[m].values * bin.eig_y.functions[k].values.transpose();
    }
  }
  return out;
}

namespace {

void check_covariate(const FittedModel& model, double z) {
  if (!model.z_domain.contains(z)) {
    throw Error(ErrorKind::covariate_out_of_domain, "covariate value " + std::to_string(z) + " outside [" +
                                                        std::to_string(model.z_domain.lower) + ", " +
                                                        std::to_string(model.z_domain.upper) + "]");
  }
}

}  // namespace

std::vector<double> refine_weights(const FittedModel& model, double z) {
  check_covariate(model, z);
  if (model.global || model.bins.size() == 1) return std::vector<double>(model.bins.size(), 1.0);
  return lp_weights_widened(0, model.refine.order, model.partition.centers, z, model.refine.bandwidth,
                            model.refine.kernel)
      .first;
}

RefinedEstimate refine(const FittedModel& model, double z) {
  const auto w = refine_weights(model, z);
  RefinedEstimate out{GridFunction(model.s_grid), GridFunction(model.t_grid), GridSurface(model.s_grid, model.t_grid)};
  for (std::size_t p = 0; p < model.bins.size(); ++p) {
    if (w[p] == 0.0) continue;
    const BinEstimate& bin = model.bins[p];
    out.mean_x.values += w[p] * bin.mean_x.values;
    out.mean_y.values += w[p] * bin.mean_y.values;
    out.beta.values += w[p] * bin.raw_beta.values;
  }
  return out;
}

bool is_dense(std::span<const Observation> x_obs, const Grid& s_grid) {
  if (x_obs.empty()) return false;
  const double limit = 2.0 * s_grid.spacing() * (1.0 + 1e-9);
  double prev = s_grid.lower;
  for (const auto& o : x_obs) {
    if (o.time - prev > limit) return false;
    prev = std::max(prev, o.time);
  }
  return s_grid.upper - prev <= limit;
}

namespace {

// Piecewise-linear interpolant through time-sorted observations, held
// constant beyond the first and last.
double interpolate(std::span<const Observation> obs, double s) {
  if (s <= obs.front().time) return obs.front().value;
  if (s >= obs.back().time) return obs.back().value;
  const auto it = std::upper_bound(obs.begin(), obs.end(), s, [](double v, const Observation& o) { return v < o.time; });
  const Observation& hi = *it;
  const Observation& lo = *(it - 1);
  if (hi.time == lo.time) return hi.value;
  const double f = (s - lo.time) / (hi.time - lo.time);
  return lo.value + f * (hi.value - lo.value);
}

std::size_t nearest_bin(const FittedModel& model, double z) {
  std::size_t best = 0;
  for (std::size_t p = 1; p < model.bins.size(); ++p) {
    if (std::abs(model.bins[p].center - z) < std::abs(model.bins[best].center - z)) best = p;
  }
  return best;
}

}  // namespace

Prediction predict(const FittedModel& model, std::span<const Observation> x_obs, double z_star) {
  check_covariate(model, z_star);
  if (x_obs.empty()) throw Error(ErrorKind::invalid_argument, "prediction needs at least one predictor observation");
  if (!std::is_sorted(x_obs.begin(), x_obs.end(), [](const Observation& a, const Observation& b) {
        return a.time < b.time;
      })) {
    throw Error(ErrorKind::invalid_argument, "predictor observations must be sorted by time");
  }
  const RefinedEstimate est = refine(model, z_star);
  const Grid& sg = model.s_grid;
  Prediction out;
  out.z_star = z_star;
  out.dense = is_dense(x_obs, sg);

  Eigen::VectorXd centered(static_cast<Eigen::Index>(sg.size()));
  if (out.dense) {
    for (Eigen::Index j = 0; j < centered.size(); ++j) {
      centered[j] = interpolate(x_obs, sg.abscissae[j]) - est.mean_x.values[j];
    }
  } else {
    const BinEstimate& bin = model.bins[nearest_bin(model, z_star)];
    const ScoreSolver solver(x_obs, bin.cov_x, bin.sigma2_x);
    Eigen::VectorXd resid(static_cast<Eigen::Index>(x_obs.size()));
    for (std::size_t l = 0; l < x_obs.size(); ++l) {
      resid[static_cast<Eigen::Index>(l)] = x_obs[l].value - est.mean_x.at(x_obs[l].time);
    }
    const Eigen::VectorXd x = solver.solve(resid);
    centered.setZero();
    const std::size_t M = std::min(model.M, bin.eig_x.size());
    for (std::size_t m = 0; m < M; ++m) {
      const GridFunction& psi = bin.eig_x.functions[m];
      const double score = bin.eig_x.values[static_cast<Eigen::Index>(m)] * evaluate_at(psi, x_obs).dot(x);
      centered += score * psi.values;
    }
  }
  const Eigen::VectorXd weighted = sg.weights.cwiseProduct(centered);
  out.y_hat = GridFunction(model.t_grid, est.mean_y.values + est.beta.values.transpose() * weighted);
  return out;
}

namespace {

void check_training_data(const LongitudinalDataset& ds) {
  if (ds.subjects.empty()) throw Error(ErrorKind::domain_violation, "training data holds no subjects");
  for (const auto& s : ds.subjects) {
    if (s.x_obs.size() < 2) {
      throw Error(ErrorKind::domain_violation, "subject " + s.id + " has fewer than two predictor observations");
    }
    if (s.y_obs.empty()) throw Error(ErrorKind::domain_violation, "subject " + s.id + " has no response observation");
  }
}

BandwidthRule smoother_rule(const FitConfig& config) {
  if (config.smoother_bandwidths) return fixed_bandwidth_rule(*config.smoother_bandwidths, config.kernel);
  if (config.cross_validate) return cv_bandwidth_rule(config.cv_folds, config.kernel);
  return default_bandwidth_rule(config.kernel);
}

std::vector<std::size_t> truncation_candidates(std::size_t max_components) {
  std::vector<std::size_t> out(max_components);
  std::iota(out.begin(), out.end(), std::size_t{1});
  return out;
}

}  // namespace

CandidateFit fit_partition(const LongitudinalDataset& ds, const BinPartition& part, const FitConfig& config) {
  check_training_data(ds);
  if (config.max_components == 0) throw Error(ErrorKind::invalid_argument, "max_components must be positive");
  FittedModel model;
  model.scalar_response = ds.scalar_response;
  model.s_grid = make_grid(ds.s_domain.lower, ds.s_domain.upper, config.s_points);
  model.t_grid = ds.scalar_response ? Grid::point() : make_grid(ds.t_domain.lower, ds.t_domain.upper, config.t_points);
  model.z_domain = ds.z_domain;
  model.partition = part;
  model.training_subjects = ds.size();

  BinFitOptions options;
  options.s_grid = model.s_grid;
  options.t_grid = model.t_grid;
  options.scalar_response = ds.scalar_response;
  options.kernel = config.kernel;
  options.max_components = std::max({config.max_components, config.M.value_or(0), config.K.value_or(0)});
  const BandwidthRule rule = smoother_rule(config);

  const std::size_t P = part.size();
  model.bins.resize(P);
  parallel_for(P, config.threads, [&](std::size_t p) {
    std::vector<Subject> members;
    members.reserve(part.index_sets[p].size());
    for (const std::size_t i : part.index_sets[p]) members.push_back(ds.subjects[i]);
    model.bins[p] = fit_bin(members, part.centers[p], options, rule);
  });

  SelectionReport& report = model.report;
  report.criterion = config.criterion;
  report.binwidth_criterion = config.binwidth_criterion;
  report.P = P;
  if (config.M && config.K) {
    model.M = *config.M;
    model.K = *config.K;
  } else {
    const auto candidates = truncation_candidates(config.max_components);
    const TruncationChoice choice =
        config.joint_truncation ? select_truncation_joint(ds, part, model.bins, candidates, config.criterion)
                                : select_truncation(ds, part, model.bins, candidates, config.criterion);
    model.M = config.M.value_or(choice.M);
    model.K = config.K.value_or(choice.K);
    report.table = choice.table;
  }
  if (ds.scalar_response) model.K = 1;
  report.M = model.M;
  report.K = model.K;

  for (auto& bin : model.bins) {
    bin.raw_beta = raw_beta(bin, model.M, model.K);
    model.sigma2_x += bin.sigma2_x / static_cast<double>(P);
    model.sigma2_y += bin.sigma2_y / static_cast<double>(P);
  }

  model.refine.order = 1;
  model.refine.kernel = config.kernel;
  const RefinedDeviance deviance(ds, part, model.bins, model.sigma2_y, model.M, model.K, config.kernel);
  double refined_deviance = std::numeric_limits<double>::infinity();
  if (config.refine_bandwidth) {
    model.refine.bandwidth = *config.refine_bandwidth;
    try {
      refined_deviance = deviance(model.refine.bandwidth);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_centers) throw;
    }
  } else {
    const auto candidates = default_refine_candidates(part.width, ds.z_domain.length());
    const BandwidthChoice choice =
        select_bandwidth(deviance, part.centers, candidates, config.criterion, ds.size(), config.kernel);
    model.refine.bandwidth = choice.b;
    refined_deviance = choice.deviance;
    report.table.insert(report.table.end(), choice.table.begin(), choice.table.end());
  }
  report.b = model.refine.bandwidth;

  const double pen = penalty_weight(config.binwidth_criterion, ds.size());
  return {std::move(model), refined_deviance + pen * static_cast<double>(report.M * report.K * P)};
}

BinwidthChoice select_binwidth(const LongitudinalDataset& ds, std::span<const std::size_t> candidates,
                               const FitConfig& config) {
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  BinwidthChoice out;
  bool found = false;
  for (const std::size_t P : sorted) {
    if (P == 0) continue;
    std::optional<CandidateFit> fitted;
    try {
      fitted = fit_partition(ds, partition(ds, P, config.min_occupancy), config);
    } catch (const Error& e) {
      // Bin counts the data cannot support are skipped.
      if (e.kind() != ErrorKind::empty_bin && e.kind() != ErrorKind::insufficient_local_data) throw;
      continue;
    }
    out.table.push_back({"P=" + std::to_string(P), to_string(config.binwidth_criterion), fitted->binwidth_score});
    if (!found || fitted->binwidth_score < out.best.binwidth_score) {
      found = true;
      out.P = P;
      out.b = fitted->model.refine.bandwidth;
      out.best = std::move(*fitted);
    }
  }
  if (!found) throw Error(ErrorKind::empty_bin, "no bin count candidate satisfies the occupancy requirement");
  return out;
}

FittedModel fit(const LongitudinalDataset& ds, const FitConfig& config) {
  check_training_data(ds);
  const BinSpec& spec = config.bins;
  if (!spec.centers.empty()) {
    return fit_partition(ds, explicit_bins(ds, spec.centers, spec.width, config.min_occupancy), config).model;
  }
  if (spec.count) return fit_partition(ds, partition(ds, *spec.count, config.min_occupancy), config).model;
  BinwidthChoice choice = select_binwidth(ds, spec.candidates, config);
  FittedModel model = std::move(choice.best.model);
  model.report.table.insert(model.report.table.end(), choice.table.begin(), choice.table.end());
  return model;
}

FittedModel fit_global(const LongitudinalDataset& ds, const FitConfig& config) {
  check_training_data(ds);
  FittedModel model = fit_partition(ds, partition(ds, 1, config.min_occupancy), config).model;
  model.global = true;
  return model;
}

}  // namespace vcflr
