#include "vcflr/selection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "vcflr/error.hpp"

namespace vcflr {

Criterion parse_criterion(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "aic") return Criterion::aic;
  if (lower == "bic") return Criterion::bic;
  throw Error(ErrorKind::invalid_argument, "unknown criterion '" + std::string(name) + "' (expected aic or bic)");
}

std::string to_string(Criterion c) { return c == Criterion::aic ? "AIC" : "BIC"; }

double penalty_weight(Criterion c, std::size_t n) {
  return c == Criterion::aic ? 2.0 : std::log(static_cast<double>(n));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const std::vector<Observation>& observations(const Subject& s, Stream stream) {
  return stream == Stream::x ? s.x_obs : s.y_obs;
}

Eigen::VectorXd values_of(std::span<const Observation> obs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j) v[static_cast<Eigen::Index>(j)] = obs[j].value;
  return v;
}

Eigen::MatrixXd basis_at(const EigenSystem& eig, std::size_t count, std::span<const Observation> obs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) out.col(static_cast<Eigen::Index>(k)) = evaluate_at(eig.functions[k], obs);
  return out;
}

double mean_diagonal(const GridSurface& cov) {
  return cov.values.size() > 0 ? cov.values.diagonal().mean() : 0.0;
}

std::vector<double> unit_weights(std::size_t P, std::size_t p) {
  std::vector<double> w(P, 0.0);
  w[p] = 1.0;
  return w;
}

}  // namespace

double criterion_variance(double sigma2, const GridSurface& cov) {
  const double floor = 1e-6 * std::abs(mean_diagonal(cov));
  return std::max({sigma2, floor, 1e-300});
}

std::vector<double> truncation_deviances(const LongitudinalDataset& ds, const BinPartition& part,
                                         std::span<const BinEstimate> bins, Stream stream,
                                         std::size_t max_components) {
  if (bins.size() != part.size()) throw Error(ErrorKind::invalid_argument, "one bin estimate per bin required");
  std::size_t kmax = max_components;
  for (const auto& bin : bins) kmax = std::min(kmax, (stream == Stream::x ? bin.eig_x : bin.eig_y).size());
  std::vector<double> dev(kmax, 0.0);
  if (kmax == 0) return dev;

  for (std::size_t p = 0; p < part.size(); ++p) {
    const BinEstimate& bin = bins[p];
    const bool is_x = stream == Stream::x;
    const GridFunction& mean = is_x ? bin.mean_x : bin.mean_y;
    const GridSurface& cov = is_x ? bin.cov_x : bin.cov_y;
    const EigenSystem& eig = is_x ? bin.eig_x : bin.eig_y;
    const double sigma2 = criterion_variance(is_x ? bin.sigma2_x : bin.sigma2_y, cov);
    const double log_term = kLog2Pi + std::log(sigma2);

    for (const std::size_t i : part.index_sets[p]) {
      const auto& obs = observations(ds.subjects[i], stream);
      if (obs.empty()) continue;
      const ScoreSolver solver(obs, cov, sigma2);
      Eigen::VectorXd resid = values_of(obs) - evaluate_at(mean, obs);
      const Eigen::VectorXd x = solver.solve(resid);
      const Eigen::MatrixXd phi = basis_at(eig, kmax, obs);
      const double n_i = static_cast<double>(obs.size());
      for (std::size_t k = 0; k < kmax; ++k) {
        const auto col = phi.col(static_cast<Eigen::Index>(k));
        resid -= eig.values[static_cast<Eigen::Index>(k)] * col.dot(x) * col;
        dev[k] += resid.squaredNorm() / sigma2 + n_i * log_term;
      }
    }
  }
  return dev;
}

double truncation_deviance(const LongitudinalDataset& ds, const BinPartition& part,
                           std::span<const BinEstimate> bins, Stream stream, std::size_t components) {
  if (components == 0) throw Error(ErrorKind::invalid_argument, "truncation must be positive");
  const auto dev = truncation_deviances(ds, part, bins, stream, components);
  if (dev.size() < components) {
    throw Error(ErrorKind::truncation_too_large,
                "some bin has fewer than " + std::to_string(components) + " components");
  }
  return dev[components - 1];
}

namespace {

std::size_t pick_truncation(const std::vector<double>& dev, std::span<const std::size_t> candidates, double pen,
                            const std::string& label, Criterion criterion, std::vector<SelectionEntry>& table) {
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (const std::size_t c : sorted) {
    if (c == 0 || c > dev.size()) continue;
    const double score = dev[c - 1] + pen * static_cast<double>(c);
    table.push_back({label + "=" + std::to_string(c), to_string(criterion), score});
    if (score < best_score) {
      best_score = score;
      best = c;
    }
  }
  if (best == 0) {
    throw Error(ErrorKind::truncation_too_large, "no " + label + " candidate is available in every bin");
  }
  return best;
}

}  // namespace

TruncationChoice select_truncation(const LongitudinalDataset& ds, const BinPartition& part,
                                   std::span<const BinEstimate> bins, std::span<const std::size_t> candidates,
                                   Criterion criterion) {
  if (candidates.empty()) throw Error(ErrorKind::invalid_argument, "no truncation candidates");
  const std::size_t top = *std::max_element(candidates.begin(), candidates.end());
  const double pen = penalty_weight(criterion, ds.size()) * static_cast<double>(part.size());
  TruncationChoice out;
  out.M = pick_truncation(truncation_deviances(ds, part, bins, Stream::x, top), candidates, pen, "M", criterion,
                          out.table);
  if (ds.scalar_response) {
    out.K = 1;
  } else {
    out.K = pick_truncation(truncation_deviances(ds, part, bins, Stream::y, top), candidates, pen, "K", criterion,
                            out.table);
  }
  return out;
}

TruncationChoice select_truncation_joint(const LongitudinalDataset& ds, const BinPartition& part,
                                         std::span<const BinEstimate> bins, std::span<const std::size_t> candidates,
                                         Criterion criterion) {
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::size_t avail_x = std::numeric_limits<std::size_t>::max(), avail_y = avail_x;
  double sigma2_y = 0.0;
  for (const auto& bin : bins) {
    avail_x = std::min(avail_x, bin.eig_x.size());
    avail_y = std::min(avail_y, bin.eig_y.size());
    sigma2_y += bin.sigma2_y / static_cast<double>(bins.size());
  }
  const double pen = penalty_weight(criterion, ds.size()) * static_cast<double>(part.size());

  std::vector<std::vector<double>> own_bin(ds.size());
  for (std::size_t p = 0; p < part.size(); ++p)
    for (const std::size_t i : part.index_sets[p]) own_bin[i] = unit_weights(part.size(), p);

  TruncationChoice out;
  double best_score = std::numeric_limits<double>::infinity();
  for (const std::size_t M : sorted) {
    if (M == 0 || M > avail_x) continue;
    for (const std::size_t K : sorted) {
      if (K == 0 || K > avail_y || (ds.scalar_response && K != 1)) continue;
      const RefinedDeviance deviance(ds, part, bins, sigma2_y, M, K);
      const double score = deviance.with_weights(own_bin) + pen * static_cast<double>(M * K);
      out.table.push_back({"M=" + std::to_string(M) + ";K=" + std::to_string(K), to_string(criterion), score});
      if (score < best_score) {
        best_score = score;
        out.M = M;
        out.K = K;
      }
    }
  }
  if (out.M == 0) throw Error(ErrorKind::truncation_too_large, "no (M, K) candidate is available in every bin");
  return out;
}

RefinedDeviance::RefinedDeviance(const LongitudinalDataset& ds, const BinPartition& part,
                                 std::span<const BinEstimate> bins, double sigma2_y, std::size_t M, std::size_t K,
                                 const Kernel1D& kernel)
    : ds_(ds), part_(part), bins_(bins), sigma2_y_(sigma2_y), M_(M), K_(K), kernel_(kernel) {
  if (bins.size() != part.size()) throw Error(ErrorKind::invalid_argument, "one bin estimate per bin required");
  double diag = 0.0;
  for (const auto& bin : bins) {
    if (M > bin.eig_x.size() || K > bin.eig_y.size() || M > static_cast<std::size_t>(bin.sigma_mk.rows()) ||
        K > static_cast<std::size_t>(bin.sigma_mk.cols())) {
      throw Error(ErrorKind::truncation_too_large, "truncation exceeds the components of some bin");
    }
    diag += mean_diagonal(bin.cov_y) / static_cast<double>(bins.size());
  }
  sigma2_y_ = std::max({sigma2_y, 1e-6 * std::abs(diag), 1e-300});
  maps_.resize(ds.size());
  for (auto& row : maps_) row.resize(part.size());
}

const Eigen::MatrixXd& RefinedDeviance::response_map(std::size_t subject, std::size_t p) const {
  auto& slot = maps_[subject][p];
  if (slot) return *slot;
  const BinEstimate& bin = bins_[p];
  const Subject& s = ds_.subjects[subject];
  const ScoreSolver solver(s.x_obs, bin.cov_x, bin.sigma2_x);
  const Eigen::MatrixXd psi = basis_at(bin.eig_x, M_, s.x_obs);
  Eigen::MatrixXd solved(psi.rows(), psi.cols());
  for (Eigen::Index m = 0; m < psi.cols(); ++m) solved.col(m) = solver.solve(psi.col(m));
  const Eigen::MatrixXd phi = basis_at(bin.eig_y, K_, s.y_obs);
  const auto mk = bin.sigma_mk.topLeftCorner(static_cast<Eigen::Index>(M_), static_cast<Eigen::Index>(K_));
  slot = std::make_unique<Eigen::MatrixXd>(phi * mk.transpose() * solved.transpose());
  return *slot;
}

double RefinedDeviance::with_weights(const std::vector<std::vector<double>>& weights) const {
  if (weights.size() != ds_.size()) throw Error(ErrorKind::invalid_argument, "one weight vector per subject required");
  double rss = 0.0, count = 0.0, dev = 0.0;
  const double log_term = kLog2Pi + std::log(sigma2_y_);
  for (std::size_t i = 0; i < ds_.size(); ++i) {
    const Subject& s = ds_.subjects[i];
    if (s.y_obs.empty() || s.x_obs.empty()) continue;
    const auto& w = weights[i];
    Eigen::VectorXd rx = values_of(s.x_obs);
    Eigen::VectorXd ey = values_of(s.y_obs);
    for (std::size_t p = 0; p < part_.size(); ++p) {
      if (w[p] == 0.0) continue;
      rx -= w[p] * evaluate_at(bins_[p].mean_x, s.x_obs);
      ey -= w[p] * evaluate_at(bins_[p].mean_y, s.y_obs);
    }
    for (std::size_t p = 0; p < part_.size(); ++p) {
      if (w[p] == 0.0) continue;
      ey -= w[p] * (response_map(i, p) * rx);
    }
    const double n_i = static_cast<double>(s.y_obs.size());
    rss += ey.squaredNorm();
    count += n_i;
    dev += ey.squaredNorm() / sigma2_y_ + n_i * log_term;
  }
  if (ds_.scalar_response && count > 0.0) {
    // Profile variance: the mean squared residual.
    const double s2 = std::max(rss / count, 1e-300);
    return rss / s2 + count * (kLog2Pi + std::log(s2));
  }
  return dev;
}

double RefinedDeviance::operator()(double b) const {
  std::vector<std::vector<double>> weights(ds_.size());
  for (std::size_t i = 0; i < ds_.size(); ++i) {
    weights[i] = part_.size() == 1 ? std::vector<double>{1.0}
                                   : lp_weights(0, 1, part_.centers, ds_.subjects[i].z, b, kernel_);
  }
  return with_weights(weights);
}

std::vector<double> default_refine_candidates(double width, double z_length, std::size_t count) {
  const double lo = 0.5 * width;
  const double hi = 0.5 * z_length;
  if (count <= 1 || !(hi > lo)) return {hi};
  std::vector<double> out(count);
  const double ratio = std::pow(hi / lo, 1.0 / static_cast<double>(count - 1));
  for (std::size_t j = 0; j < count; ++j) out[j] = lo * std::pow(ratio, static_cast<double>(j));
  out.back() = hi;
  return out;
}

BandwidthChoice select_bandwidth(const RefinedDeviance& deviance, std::span<const double> centers,
                                 std::span<const double> candidates, Criterion criterion, std::size_t n,
                                 const Kernel1D& kernel) {
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  const double pen = penalty_weight(criterion, n);
  BandwidthChoice out;
  double best = std::numeric_limits<double>::infinity();
  for (const double b : sorted) {
    double dev = 0.0, trace = 1.0;
    try {
      dev = deviance(b);
      if (centers.size() > 1) trace = smoothing_matrix(centers, b, kernel).trace_sts;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_centers) throw;
      continue;
    }
    const double score = dev + pen * trace;
    out.table.push_back({"b=" + shortest(b), to_string(criterion), score});
    if (score <= best) {  // ascending order: ties go to the larger b
      best = score;
      out.b = b;
      out.deviance = dev;
    }
  }
  if (out.table.empty()) {
    throw Error(ErrorKind::insufficient_centers, "no refinement bandwidth candidate is admissible");
  }
  return out;
}

namespace {

// Held-out points merged by location: squared error against a fit f is
// Σ count·(mean − f)² up to a candidate-independent constant.
struct Merged1 {
  double x, mean, count;
};
struct Merged2 {
  double x1, x2, mean, count;
};

std::vector<Merged1> merge_points(std::vector<Point1> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point1& a, const Point1& b) { return a.x < b.x; });
  std::vector<Merged1> out;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < pts.size() && pts[j].x == pts[i].x) sum += pts[j++].y;
    out.push_back({pts[i].x, sum / static_cast<double>(j - i), static_cast<double>(j - i)});
    i = j;
  }
  return out;
}

std::vector<Merged2> merge_points(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2); });
  std::vector<Merged2> out;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < pts.size() && pts[j].x1 == pts[i].x1 && pts[j].x2 == pts[i].x2) sum += pts[j++].y;
    out.push_back({pts[i].x1, pts[i].x2, sum / static_cast<double>(j - i), static_cast<double>(j - i)});
    i = j;
  }
  return out;
}

double eval(const LocalLinear1D& s, const Merged1& p, const LocalFitConfig& c) { return s.at(p.x, c); }
double eval(const LocalLinear2D& s, const Merged2& p, const LocalFitConfig& c) { return s.at(p.x1, p.x2, c); }

template <class Smoother, class Pt>
LocalFitConfig cross_validate(const std::vector<std::vector<Pt>>& data, std::size_t folds,
                              std::span<const LocalFitConfig> candidates, std::vector<double>* scores) {
  if (candidates.empty()) throw Error(ErrorKind::invalid_argument, "no bandwidth candidates");
  if (folds < 2 || data.size() < folds) {
    throw Error(ErrorKind::invalid_argument, "cross-validation needs at least as many subjects as folds (" +
                                                 std::to_string(folds) + ")");
  }
  std::vector<double> sse(candidates.size(), 0.0);
  double scale = 0.0;  // Σ count·mean², sets the roundoff floor for ties
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Pt> train, test;
    for (std::size_t g = 0; g < data.size(); ++g) {
      auto& dst = g % folds == f ? test : train;
      dst.insert(dst.end(), data[g].begin(), data[g].end());
    }
    if (test.empty()) continue;
    const Smoother smoother(train);
    const auto held = merge_points(std::move(test));
    for (const auto& p : held) scale += p.count * p.mean * p.mean;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (!std::isfinite(sse[c])) continue;
      for (const auto& p : held) {
        double fit = 0.0;
        try {
          fit = eval(smoother, p, candidates[c]);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::insufficient_local_data) throw;
          sse[c] = std::numeric_limits<double>::infinity();
          break;
        }
        sse[c] += p.count * (p.mean - fit) * (p.mean - fit);
      }
    }
  }
  if (scores) *scores = sse;

  const double best = *std::min_element(sse.begin(), sse.end());
  std::size_t pick = 0;
  double widest = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const bool tie = std::isfinite(best) ? sse[c] <= best + 1e-9 * best + 1e-14 * scale + 1e-300 : true;
    if (tie && candidates[c].bandwidth > widest) {
      widest = candidates[c].bandwidth;
      pick = c;
    }
  }
  return candidates[pick];
}

}  // namespace

LocalFitConfig cv_smoother_bandwidth(const Grouped1D& data, std::size_t folds,
                                     std::span<const LocalFitConfig> candidates, std::vector<double>* scores) {
  return cross_validate<LocalLinear1D>(data, folds, candidates, scores);
}

LocalFitConfig cv_smoother_bandwidth(const Grouped2D& data, std::size_t folds,
                                     std::span<const LocalFitConfig> candidates, std::vector<double>* scores) {
  return cross_validate<LocalLinear2D>(data, folds, candidates, scores);
}

std::vector<double> default_cv_factors() {
  std::vector<double> out;
  for (int j = -3; j <= 3; ++j) out.push_back(std::exp2(static_cast<double>(j) / 3.0));
  return out;
}

BandwidthRule cv_bandwidth_rule(std::size_t folds, const Kernel1D& kernel) {
  auto candidates = [](const LocalFitConfig& start) {
    std::vector<LocalFitConfig> out;
    for (const double f : default_cv_factors()) out.push_back(start.widened(f));
    return out;
  };
  auto one = [=](SmootherKind, const Grouped1D& d) {
    const LocalFitConfig start = default_bandwidth_1d(d, kernel);
    if (d.size() < folds) return start;
    return cv_smoother_bandwidth(d, folds, candidates(start));
  };
  auto two = [=](SmootherKind, const Grouped2D& d) {
    const LocalFitConfig start = default_bandwidth_2d(d, kernel);
    if (d.size() < folds) return start;
    return cv_smoother_bandwidth(d, folds, candidates(start));
  };
  return {one, two};
}

void write_report_csv(std::ostream& out, const SelectionReport& report) {
  out << "candidate,criterion,score\n";
  for (const auto& e : report.table) out << e.candidate << ',' << e.criterion << ',' << shortest(e.score) << '\n';
}

}  // namespace vcflr
