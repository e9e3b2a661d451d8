#include "vcflr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vcflr/error.hpp"

namespace vcflr {

Sampling parse_sampling(std::string_view name) {
  if (name == "regular" || name == "1") return Sampling::regular;
  if (name == "sparse" || name == "2") return Sampling::sparse;
  throw Error(ErrorKind::invalid_argument, "unknown example '" + std::string(name) + "' (expected regular or sparse)");
}

std::string to_string(Sampling s) { return s == Sampling::regular ? "regular" : "sparse"; }

double sim_mean_x(double s) { return s + std::sin(s); }

double sim_slope_factor(const SimDesign& d, double z) { return d.varying ? 1.0 + z : 1.5; }

double sim_mean_y(const SimDesign& d, double z, double t) { return sim_slope_factor(d, z) * (t + std::sin(t)); }

double sim_psi(int m, double s) {
  const double c = std::sqrt(0.2);
  const double w = std::numbers::pi * s / 5.0;
  switch (m) {
    case 0: return -c * std::cos(w);
    case 1: return c * std::sin(w);
    case 2: return -c * std::cos(2.0 * w);
    default: throw Error(ErrorKind::invalid_argument, "component index out of range");
  }
}

double sim_beta(const SimDesign& d, double z, double s, double t) {
  double sum = 0.0;
  for (int m = 0; m < 3; ++m) sum += sim_psi(m, s) * sim_psi(m, t);
  return sim_slope_factor(d, z) * sum;
}

std::mt19937_64 subject_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t subject) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return std::mt19937_64(mix(mix(mix(seed) ^ stream) ^ subject));
}

namespace {

constexpr std::size_t kQuadraturePoints = 501;

struct Quadrature {
  Grid grid = make_grid(SimDesign::lower, SimDesign::upper, kQuadraturePoints);
  // Gram matrix of the basis under the trapezoid rule.
  std::array<std::array<double, 3>, 3> gram{};

  Quadrature() {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < grid.abscissae.size(); ++j) {
          const double s = grid.abscissae[j];
          sum += grid.weights[j] * sim_psi(a, s) * sim_psi(b, s);
        }
        gram[a][b] = sum;
      }
    }
  }
};

const Quadrature& quadrature() {
  static const Quadrature q;
  return q;
}

double x_centered(const std::array<double, 3>& zeta, double s) {
  return zeta[0] * sim_psi(0, s) + zeta[1] * sim_psi(1, s) + zeta[2] * sim_psi(2, s);
}

std::vector<double> draw_times(const SimDesign& d, std::mt19937_64& rng, std::size_t& count_out) {
  std::vector<double> times;
  if (d.sampling == Sampling::regular) {
    for (std::size_t j = 0; j < d.regular_points; ++j) times.push_back(static_cast<double>(j) / 3.0);
  } else {
    std::uniform_int_distribution<std::size_t> count(d.min_count, d.max_count);
    std::uniform_real_distribution<double> unif(SimDesign::lower, SimDesign::upper);
    const std::size_t n = count(rng);
    for (std::size_t j = 0; j < n; ++j) times.push_back(unif(rng));
    std::sort(times.begin(), times.end());
  }
  count_out = times.size();
  return times;
}

std::string subject_id(std::size_t i) { return "s" + std::to_string(i + 1); }

SimData make(const SimDesign& d, std::size_t n, std::uint64_t seed, std::uint64_t stream, const Grid& truth_grid,
             std::size_t test_points) {
  SimData out;
  auto& ds = out.data;
  ds.s_domain = {SimDesign::lower, SimDesign::upper};
  ds.t_domain = {SimDesign::lower, SimDesign::upper};
  ds.z_domain = {0.0, 1.0};
  out.truth.grid = truth_grid;
  const bool test = test_points > 0;
  const double sd_x = std::sqrt(d.noise_var_x);
  const double sd_y = std::sqrt(d.noise_var_y);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = subject_rng(seed, stream, i);
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Subject s;
    s.id = subject_id(i);
    s.z = unif01(rng);
    std::array<double, 3> zeta{};
    for (int m = 0; m < 3; ++m) zeta[m] = d.score_sd[m] * gauss(rng);

    if (test) {
      for (std::size_t j = 0; j < test_points; ++j) {
        const double t = SimDesign::lower + (SimDesign::upper - SimDesign::lower) * static_cast<double>(j) /
                                                static_cast<double>(test_points - 1);
        s.x_obs.push_back({t, sim_mean_x(t) + x_centered(zeta, t)});
      }
    } else {
      std::size_t count = 0;
      const auto xt = draw_times(d, rng, count);
      for (const double t : xt) s.x_obs.push_back({t, sim_mean_x(t) + x_centered(zeta, t)});
      for (auto& o : s.x_obs) o.value += sd_x * gauss(rng);
      const auto yt = draw_times(d, rng, count);
      for (const double t : yt) s.y_obs.push_back({t, conditional_response(d, s.z, zeta, t)});
      for (auto& o : s.y_obs) o.value += sd_y * gauss(rng);
    }

    GridFunction curve(truth_grid);
    for (Eigen::Index j = 0; j < curve.values.size(); ++j) {
      curve.values[j] = conditional_response(d, s.z, zeta, truth_grid.abscissae[j]);
    }
    out.truth.ids.push_back(s.id);
    out.truth.z.push_back(s.z);
    out.truth.zeta.push_back(zeta);
    out.truth.response.push_back(std::move(curve));
    ds.subjects.push_back(std::move(s));
  }
  return out;
}

}  // namespace

double conditional_response(const SimDesign& d, double z, const std::array<double, 3>& zeta, double t) {
  // ∫ψ_m X_c = Σ_m' G_mm' ζ_m' with G the quadrature Gram matrix.
  const auto& g = quadrature().gram;
  double integral = 0.0;
  for (int m = 0; m < 3; ++m) {
    const double proj = g[m][0] * zeta[0] + g[m][1] * zeta[1] + g[m][2] * zeta[2];
    integral += sim_psi(m, t) * proj;
  }
  return sim_mean_y(d, z, t) + sim_slope_factor(d, z) * integral;
}

double conditional_response_exact(const SimDesign& d, double z, const std::array<double, 3>& zeta, double t) {
  return sim_mean_y(d, z, t) + sim_slope_factor(d, z) * x_centered(zeta, t);
}

SimData generate(const SimDesign& design, std::size_t n, std::uint64_t seed, const Grid& truth_grid) {
  return make(design, n, seed, 0, truth_grid, 0);
}

SimData generate_test(const SimDesign& design, std::size_t n, std::uint64_t seed, const Grid& truth_grid,
                      std::size_t x_points) {
  if (x_points < 2) throw Error(ErrorKind::invalid_argument, "test predictors need at least two points");
  return make(design, n, seed, 1, truth_grid, x_points);
}

double mispe(const SimTruth& truth, std::span<const GridFunction> predictions) {
  if (predictions.size() != truth.response.size()) {
    throw Error(ErrorKind::grid_mismatch, "prediction count differs from truth count");
  }
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const GridFunction& pred = predictions[i];
    const GridFunction& tru = truth.response[i];
    if (!(pred.grid == tru.grid)) throw Error(ErrorKind::grid_mismatch, "prediction grid differs from truth grid");
    const Eigen::VectorXd diff = (tru.values - pred.values).array().square();
    total += diff.dot(tru.grid.weights) / tru.grid.length();
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace vcflr
