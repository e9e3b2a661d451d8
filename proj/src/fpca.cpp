#include "vcflr/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vcflr/error.hpp"

namespace vcflr {

const char* to_string(SmootherKind kind) {
  switch (kind) {
    case SmootherKind::mean_x: return "mean_x";
    case SmootherKind::mean_y: return "mean_y";
    case SmootherKind::cov_x: return "cov_x";
    case SmootherKind::cov_y: return "cov_y";
    case SmootherKind::var_x: return "var_x";
    case SmootherKind::var_y: return "var_y";
    case SmootherKind::cross: return "cross";
  }
  return "unknown";
}

namespace {

struct RunningStats {
  double n = 0, mean = 0, m2 = 0;
  void add(double v) {
    n += 1;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  double sd() const { return n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0; }
};

double rule_of_thumb(const RunningStats& st, double exponent) {
  if (st.n < 1) return 1.0;
  double sd = st.sd();
  if (!(sd > 0.0)) sd = 1.0;
  return 1.06 * sd * std::pow(st.n, -exponent);
}

const std::vector<Observation>& observations(const Subject& s, Stream stream) {
  return stream == Stream::x ? s.x_obs : s.y_obs;
}

}  // namespace

LocalFitConfig default_bandwidth_1d(const Grouped1D& data, const Kernel1D& kernel) {
  RunningStats st;
  for (const auto& g : data)
    for (const auto& p : g) st.add(p.x);
  LocalFitConfig cfg;
  cfg.kernel = kernel;
  cfg.bandwidth = rule_of_thumb(st, 1.0 / 5.0);
  return cfg;
}

LocalFitConfig default_bandwidth_2d(const Grouped2D& data, const Kernel1D& kernel) {
  RunningStats s1, s2;
  for (const auto& g : data) {
    for (const auto& p : g) {
      s1.add(p.x1);
      s2.add(p.x2);
    }
  }
  LocalFitConfig cfg;
  cfg.kernel = kernel;
  cfg.bandwidth = rule_of_thumb(s1, 1.0 / 6.0);
  cfg.bandwidth2 = rule_of_thumb(s2, 1.0 / 6.0);
  return cfg;
}

BandwidthRule default_bandwidth_rule(const Kernel1D& kernel) {
  return {[kernel](SmootherKind, const Grouped1D& d) { return default_bandwidth_1d(d, kernel); },
          [kernel](SmootherKind, const Grouped2D& d) { return default_bandwidth_2d(d, kernel); }};
}

BandwidthRule fixed_bandwidth_rule(const BinBandwidths& bw, const Kernel1D& kernel) {
  auto one = [bw, kernel](SmootherKind kind, const Grouped1D&) {
    LocalFitConfig cfg;
    cfg.kernel = kernel;
    switch (kind) {
      case SmootherKind::mean_x: cfg.bandwidth = bw.mean_x; break;
      case SmootherKind::mean_y: cfg.bandwidth = bw.mean_y; break;
      case SmootherKind::var_x: cfg.bandwidth = bw.var_x; break;
      case SmootherKind::var_y: cfg.bandwidth = bw.var_y; break;
      case SmootherKind::cross: cfg.bandwidth = bw.cross_s; break;
      default: throw Error(ErrorKind::invalid_argument, "no 1-D bandwidth for this smoother");
    }
    return cfg;
  };
  auto two = [bw, kernel](SmootherKind kind, const Grouped2D&) {
    LocalFitConfig cfg;
    cfg.kernel = kernel;
    switch (kind) {
      case SmootherKind::cov_x: cfg.bandwidth = cfg.bandwidth2 = bw.cov_x; break;
      case SmootherKind::cov_y: cfg.bandwidth = cfg.bandwidth2 = bw.cov_y; break;
      case SmootherKind::cross:
        cfg.bandwidth = bw.cross_s;
        cfg.bandwidth2 = bw.cross_t;
        break;
      default: throw Error(ErrorKind::invalid_argument, "no 2-D bandwidth for this smoother");
    }
    return cfg;
  };
  return {one, two};
}

Grouped1D stream_points(std::span<const Subject> subjects, Stream stream) {
  Grouped1D out(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    for (const auto& o : observations(subjects[i], stream)) out[i].push_back({o.time, o.value});
  }
  return out;
}

GridFunction estimate_mean(std::span<const Subject> subjects, Stream stream, const LocalFitConfig& cfg,
                           const Grid& grid) {
  const auto pooled = flatten(stream_points(subjects, stream));
  if (pooled.size() < 2) {
    throw Error(ErrorKind::insufficient_local_data, "mean estimation needs at least two observations");
  }
  return local_linear_1d(pooled, cfg, grid);
}

Eigen::VectorXd evaluate_at(const GridFunction& f, std::span<const Observation> obs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j) out[static_cast<Eigen::Index>(j)] = f.at(obs[j].time);
  return out;
}

RawCovariances raw_covariances(std::span<const Subject> subjects, Stream stream, const GridFunction& mean) {
  RawCovariances raw;
  raw.off_diagonal.resize(subjects.size());
  raw.diagonal.resize(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& obs = observations(subjects[i], stream);
    Eigen::VectorXd centered = -evaluate_at(mean, obs);
    for (std::size_t j = 0; j < obs.size(); ++j) centered[static_cast<Eigen::Index>(j)] += obs[j].value;
    auto& off = raw.off_diagonal[i];
    off.reserve(obs.size() * (obs.size() > 0 ? obs.size() - 1 : 0));
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const double cj = centered[static_cast<Eigen::Index>(j)];
      raw.diagonal[i].push_back({obs[j].time, cj * cj});
      for (std::size_t l = 0; l < obs.size(); ++l) {
        if (l == j) continue;
        off.push_back({obs[j].time, obs[l].time, cj * centered[static_cast<Eigen::Index>(l)]});
      }
    }
  }
  return raw;
}

GridSurface smooth_covariance(std::span<const Point2> pairs, const LocalFitConfig& cfg, const Grid& grid) {
  GridSurface s = local_linear_2d(pairs, cfg, grid, grid);
  s.values = 0.5 * (s.values + s.values.transpose()).eval();
  return s;
}

double estimate_sigma2(std::span<const Point1> diagonal, const GridSurface& surface, const LocalFitConfig& cfg,
                       const Grid& grid) {
  if (!(surface.rows == grid) || !(surface.cols == grid)) {
    throw Error(ErrorKind::grid_mismatch, "variance estimate needs the covariance on the same grid");
  }
  GridFunction diff = local_linear_1d(diagonal, cfg, grid);
  diff.values -= surface.values.diagonal();
  const double quarter = grid.length() / 4.0;
  const double value = 2.0 / grid.length() * integrate_range(diff, grid.lower + quarter, grid.upper - quarter);
  return std::max(0.0, value);
}

EigenSystem eigendecompose(const GridSurface& surface, const Grid& grid, std::size_t max_components) {
  if (!(surface.rows == grid) || !(surface.cols == grid)) {
    throw Error(ErrorKind::grid_mismatch, "eigendecomposition needs a surface on grid x grid");
  }
  const Eigen::MatrixXd& g = surface.values;
  const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::not_symmetric, "covariance surface is not symmetric");
  }
  EigenSystem out;
  if (g.cwiseAbs().maxCoeff() == 0.0) return out;

  const Eigen::VectorXd sqrt_w = grid.weights.cwiseSqrt();
  const Eigen::MatrixXd op = sqrt_w.asDiagonal() * (0.5 * (g + g.transpose())) * sqrt_w.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::invalid_argument, "eigensolver failed");

  const Eigen::Index n = op.rows();
  const double largest = solver.eigenvalues()[n - 1];
  std::vector<double> values;
  for (Eigen::Index idx = n - 1; idx >= 0 && out.functions.size() < max_components; --idx) {
    const double lambda = solver.eigenvalues()[idx];
    if (!(lambda > 0.0) || lambda <= 1e-10 * largest) break;
    GridFunction f(grid, solver.eigenvectors().col(idx).cwiseQuotient(sqrt_w));
    f.values /= std::sqrt(inner_product(f, f));
    const double total = integrate(f);
    bool flip = total < 0.0;
    if (std::abs(total) <= 1e-12) {
      for (Eigen::Index k = 0; k < f.values.size(); ++k) {
        if (std::abs(f.values[k]) > 1e-12) {
          flip = f.values[k] < 0.0;
          break;
        }
      }
    }
    if (flip) f.values = -f.values;
    values.push_back(lambda);
    out.functions.push_back(std::move(f));
  }
  out.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return out;
}

Grouped2D raw_cross_covariances(std::span<const Subject> subjects, const GridFunction& mean_x,
                                const GridFunction& mean_y) {
  Grouped2D out(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = subjects[i];
    auto& pts = out[i];
    pts.reserve(s.x_obs.size() * s.y_obs.size());
    for (const auto& u : s.x_obs) {
      const double cu = u.value - mean_x.at(u.time);
      for (const auto& v : s.y_obs) pts.push_back({u.time, v.time, cu * (v.value - mean_y.at(v.time))});
    }
  }
  return out;
}

GridSurface smooth_cross_covariance(std::span<const Point2> pairs, const LocalFitConfig& cfg, const Grid& s_grid,
                                    const Grid& t_grid) {
  if (!t_grid.is_point()) return local_linear_2d(pairs, cfg, s_grid, t_grid);
  std::vector<Point1> pts;
  pts.reserve(pairs.size());
  for (const auto& p : pairs) pts.push_back({p.x1, p.y});
  const GridFunction curve = local_linear_1d(pts, cfg, s_grid);
  return GridSurface(s_grid, t_grid, curve.values);
}

Eigen::MatrixXd sigma_mk(const EigenSystem& eig_x, const EigenSystem& eig_y, const GridSurface& cross, std::size_t M,
                         std::size_t K) {
  if (M > eig_x.size() || K > eig_y.size()) {
    throw Error(ErrorKind::truncation_too_large,
                "requested " + std::to_string(M) + "x" + std::to_string(K) + " components, have " +
                    std::to_string(eig_x.size()) + "x" + std::to_string(eig_y.size()));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = 0; k < K; ++k) {
      out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
          double_integral(cross, eig_x.functions[m], eig_y.functions[k]);
    }
  }
  return out;
}

ScoreSolver::ScoreSolver(std::span<const Observation> obs, const GridSurface& cov, double sigma2) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  if (n == 0) throw Error(ErrorKind::invalid_argument, "score estimation needs at least one observation");
  times_.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) times_[j] = obs[static_cast<std::size_t>(j)].time;
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j; k < n; ++k) {
      const double v = cov.at(times_[j], times_[k]);
      sigma(j, k) = v;
      sigma(k, j) = v;
    }
    sigma(j, j) += sigma2;
  }
  auto condition = [](const Eigen::MatrixXd& m) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
                                   .eigenvalues()
                                   .cwiseAbs();
    const double lo = ev.minCoeff();
    return lo > 0.0 ? ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
  };
  if (condition(sigma) > 1e12) {
    const double jitter = 1e-8 * std::abs(sigma.trace()) / static_cast<double>(n);
    sigma.diagonal().array() += jitter;
    if (!(jitter > 0.0) || !std::isfinite(condition(sigma)) || condition(sigma) > 1e15) {
      throw Error(ErrorKind::singular_covariance, "observation covariance is singular");
    }
  }
  ldlt_.compute(sigma);
  if (ldlt_.info() != Eigen::Success) throw Error(ErrorKind::singular_covariance, "observation covariance is singular");
}

Eigen::VectorXd ScoreSolver::solve(const Eigen::VectorXd& r) const { return ldlt_.solve(r); }

Eigen::VectorXd estimate_scores(std::span<const Observation> obs, const GridFunction& mean, const GridSurface& cov,
                                const EigenSystem& eig, double sigma2, std::size_t truncation) {
  if (truncation > eig.size()) throw Error(ErrorKind::truncation_too_large, "not enough components for scores");
  const ScoreSolver solver(obs, cov, sigma2);
  Eigen::VectorXd residual(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j) residual[static_cast<Eigen::Index>(j)] = obs[j].value - mean.at(obs[j].time);
  const Eigen::VectorXd x = solver.solve(residual);
  Eigen::VectorXd scores(static_cast<Eigen::Index>(truncation));
  for (std::size_t k = 0; k < truncation; ++k) {
    scores[static_cast<Eigen::Index>(k)] = eig.values[static_cast<Eigen::Index>(k)] * evaluate_at(eig.functions[k], obs).dot(x);
  }
  return scores;
}

namespace {

GridFunction fit_mean(std::span<const Subject> subjects, Stream stream, SmootherKind kind, const Grid& grid,
                      const BandwidthRule& rule, double& used) {
  const Grouped1D pts = stream_points(subjects, stream);
  const LocalFitConfig start = rule.one_d(kind, pts);
  const auto flat = flatten(pts);
  if (flat.size() < 2) throw Error(ErrorKind::insufficient_local_data, "mean estimation needs two observations");
  const LocalLinear1D smoother(flat);
  auto [curve, cfg] = with_widening(start, [&](const LocalFitConfig& c) { return smoother.on(grid, c); });
  used = cfg.bandwidth;
  return curve;
}

struct CovarianceFit {
  GridSurface surface;
  double sigma2 = 0.0;
};

CovarianceFit fit_covariance(std::span<const Subject> subjects, Stream stream, const GridFunction& mean,
                             SmootherKind cov_kind, SmootherKind var_kind, const Grid& grid, const BandwidthRule& rule,
                             double& cov_used, double& var_used) {
  const RawCovariances raw = raw_covariances(subjects, stream, mean);
  const auto off = flatten(raw.off_diagonal);
  if (off.size() < 3) {
    throw Error(ErrorKind::insufficient_local_data, "too few within-subject pairs for covariance smoothing");
  }
  const LocalLinear2D smoother(off);
  auto [surface, cov_cfg] = with_widening(rule.two_d(cov_kind, raw.off_diagonal), [&](const LocalFitConfig& c) {
    GridSurface s = smoother.on(grid, grid, c);
    s.values = 0.5 * (s.values + s.values.transpose()).eval();
    return s;
  });
  cov_used = cov_cfg.bandwidth;

  const auto diag = flatten(raw.diagonal);
  auto [sigma2, var_cfg] = with_widening(rule.one_d(var_kind, raw.diagonal), [&](const LocalFitConfig& c) {
    return estimate_sigma2(diag, surface, c, grid);
  });
  var_used = var_cfg.bandwidth;
  return {std::move(surface), sigma2};
}

}  // namespace

BinEstimate fit_bin(std::span<const Subject> subjects, double center, const BinFitOptions& options,
                    const BandwidthRule& rule) {
  BinEstimate est;
  est.center = center;
  est.subjects = subjects.size();
  for (const auto& s : subjects) {
    if (s.x_obs.empty() || s.y_obs.empty()) {
      throw Error(ErrorKind::insufficient_local_data, "subject " + s.id + " lacks observations on a stream");
    }
  }
  const Grid& sg = options.s_grid;
  const Grid& tg = options.t_grid;

  est.mean_x = fit_mean(subjects, Stream::x, SmootherKind::mean_x, sg, rule, est.bandwidths.mean_x);
  auto cx = fit_covariance(subjects, Stream::x, est.mean_x, SmootherKind::cov_x, SmootherKind::var_x, sg, rule,
                           est.bandwidths.cov_x, est.bandwidths.var_x);
  est.cov_x = std::move(cx.surface);
  est.sigma2_x = cx.sigma2;
  est.eig_x = eigendecompose(est.cov_x, sg, options.max_components);

  if (options.scalar_response) {
    // One response value per subject: its mean and variance play the roles
    // of μ̃_Y and the single eigenpair (φ ≡ 1) on a one-point grid.
    double sum = 0.0, sq = 0.0;
    for (const auto& s : subjects) sum += s.y_obs.front().value;
    const double n = static_cast<double>(subjects.size());
    const double mu = sum / n;
    for (const auto& s : subjects) sq += (s.y_obs.front().value - mu) * (s.y_obs.front().value - mu);
    const double var = n > 1 ? sq / (n - 1) : 0.0;
    est.mean_y = GridFunction(tg, Eigen::VectorXd::Constant(1, mu));
    est.cov_y = GridSurface(tg, tg, Eigen::MatrixXd::Constant(1, 1, var));
    if (var > 0.0) {
      est.eig_y.values = Eigen::VectorXd::Constant(1, var);
      est.eig_y.functions.push_back(GridFunction(tg, Eigen::VectorXd::Ones(1)));
    }
    est.sigma2_y = 0.0;
  } else {
    est.mean_y = fit_mean(subjects, Stream::y, SmootherKind::mean_y, tg, rule, est.bandwidths.mean_y);
    auto cy = fit_covariance(subjects, Stream::y, est.mean_y, SmootherKind::cov_y, SmootherKind::var_y, tg, rule,
                             est.bandwidths.cov_y, est.bandwidths.var_y);
    est.cov_y = std::move(cy.surface);
    est.sigma2_y = cy.sigma2;
    est.eig_y = eigendecompose(est.cov_y, tg, options.max_components);
  }

  const Grouped2D cross_raw = raw_cross_covariances(subjects, est.mean_x, est.mean_y);
  const auto cross_flat = flatten(cross_raw);
  if (options.scalar_response) {
    Grouped1D as_1d(cross_raw.size());
    for (std::size_t i = 0; i < cross_raw.size(); ++i)
      for (const auto& p : cross_raw[i]) as_1d[i].push_back({p.x1, p.y});
    const auto flat = flatten(as_1d);
    const LocalLinear1D smoother(flat);
    auto [curve, cfg] = with_widening(rule.one_d(SmootherKind::cross, as_1d),
                                      [&](const LocalFitConfig& c) { return smoother.on(sg, c); });
    est.cross_cov = GridSurface(sg, tg, curve.values);
    est.bandwidths.cross_s = cfg.bandwidth;
  } else {
    const LocalLinear2D smoother(cross_flat);
    auto [surface, cfg] = with_widening(rule.two_d(SmootherKind::cross, cross_raw),
                                        [&](const LocalFitConfig& c) { return smoother.on(sg, tg, c); });
    est.cross_cov = std::move(surface);
    est.bandwidths.cross_s = cfg.bandwidth;
    est.bandwidths.cross_t = cfg.second();
  }

  est.sigma_mk = sigma_mk(est.eig_x, est.eig_y, est.cross_cov, est.eig_x.size(), est.eig_y.size());
  return est;
}

}  // namespace vcflr
