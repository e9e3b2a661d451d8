#pragma once

// Randomised property checks shared by property_tests and acceptance. Each
// runs `cases` draws from a seeded generator and reports how many broke the
// property; draws the library legitimately rejects (too little local data)
// are redrawn and counted separately.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "vcflr/error.hpp"
#include "vcflr/fpca.hpp"
#include "vcflr/regression.hpp"
#include "vcflr/simulation.hpp"
#include "vcflr/smoothing.hpp"

namespace vcflr::test {

struct PropertyResult {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::size_t redraws = 0;
  double worst = 0.0;  // largest scaled error seen
  std::string first_failure;

  bool ok() const { return failures == 0 && cases > 0; }
};

namespace detail {

// Runs `draw` until `cases` draws have completed. `draw` returns the scaled
// error of one case (pass when <= 1); rejected draws throw
// insufficient_local_data or insufficient_centers.
inline PropertyResult run_cases(std::size_t cases, const std::function<double(Gen&, std::string&)>& draw,
                                std::uint64_t seed) {
  PropertyResult r;
  Gen gen(seed);
  while (r.cases < cases) {
    std::string what;
    double err;
    try {
      err = draw(gen, what);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_local_data && e.kind() != ErrorKind::insufficient_centers) throw;
      if (++r.redraws > 50 * cases) break;
      continue;
    }
    ++r.cases;
    r.worst = std::max(r.worst, err);
    if (!(err <= 1.0)) {
      if (r.failures++ == 0) r.first_failure = "case " + std::to_string(r.cases) + ": " + what;
    }
  }
  return r;
}

inline Kernel1D random_kernel(Gen& g) { return Kernel1D{g.kernel()}; }

// Smooth random function: a short random trigonometric series.
struct RandomCurve {
  double a0;
  std::vector<double> amp, freq, phase;
  explicit RandomCurve(Gen& g, double length) : a0(g.normal()) {
    const int terms = g.integer(1, 4);
    for (int i = 0; i < terms; ++i) {
      amp.push_back(g.normal());
      freq.push_back(g.uniform(0.2, 3.0) * 3.14159 / length);
      phase.push_back(g.uniform(0, 6.3));
    }
  }
  double operator()(double s) const {
    double v = a0;
    for (std::size_t i = 0; i < amp.size(); ++i) v += amp[i] * std::cos(freq[i] * s + phase[i]);
    return v;
  }
};

// Σ_j λ_j f_j(s) f_j(t) for random curves and positive λ: symmetric and
// positive semidefinite.
inline GridSurface random_covariance(Gen& g, const Grid& grid, int rank) {
  GridSurface out(grid, grid);
  for (int j = 0; j < rank; ++j) {
    const RandomCurve f(g, grid.length());
    const double lambda = std::exp(g.uniform(-3, 2));
    const Eigen::VectorXd v = sampled(grid, f).values;
    out.values += lambda * v * v.transpose();
  }
  return out;
}

inline Grid random_grid(Gen& g, int lo, int hi) {
  const double a = g.uniform(-5, 5);
  return make_grid(a, a + g.uniform(0.5, 20), static_cast<std::size_t>(g.integer(lo, hi)));
}

// Random bin on the given grids whose estimates are internally consistent
// enough for both prediction paths.
inline BinEstimate random_bin(Gen& g, const Grid& sg, const Grid& tg, std::size_t M, std::size_t K) {
  BinEstimate b;
  b.mean_x = sampled(sg, RandomCurve(g, sg.length()));
  b.mean_y = sampled(tg, RandomCurve(g, tg.length()));
  b.cov_x = random_covariance(g, sg, static_cast<int>(M) + 1);
  b.cov_y = random_covariance(g, tg, static_cast<int>(K) + 1);
  b.cross_cov = GridSurface(sg, tg);
  b.eig_x = eigendecompose(b.cov_x, sg, M);
  b.eig_y = eigendecompose(b.cov_y, tg, K);
  b.sigma_mk = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(b.eig_x.size()),
                                            static_cast<Eigen::Index>(b.eig_y.size()), [&] { return g.normal(); });
  b.sigma2_x = g.uniform(0.05, 2);
  b.sigma2_y = g.uniform(0.05, 2);
  b.raw_beta = raw_beta(b, b.eig_x.size(), b.eig_y.size());
  return b;
}

inline FittedModel model_with_bins(Gen& g, std::size_t P, const Grid& sg, const Grid& tg, bool identical) {
  FittedModel m;
  m.s_grid = sg;
  m.t_grid = tg;
  m.z_domain = {0, 1};
  m.partition.width = 1.0 / static_cast<double>(P);
  m.M = static_cast<std::size_t>(g.integer(1, 3));
  m.K = static_cast<std::size_t>(g.integer(1, 3));
  const BinEstimate shared = random_bin(g, sg, tg, m.M, m.K);
  for (std::size_t p = 0; p < P; ++p) {
    m.partition.centers.push_back((static_cast<double>(p) + 0.5) / static_cast<double>(P));
    m.bins.push_back(identical ? shared : random_bin(g, sg, tg, m.M, m.K));
    m.bins.back().center = m.partition.centers.back();
  }
  m.refine.kernel = random_kernel(g);
  m.refine.bandwidth = g.uniform(0.5, 3.0) * m.partition.width;
  return m;
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

// Local linear smoothers reproduce affine data at any bandwidth and kernel.
inline PropertyResult smoother_affine_exactness(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const double lo = g.uniform(-10, 10), len = g.uniform(0.1, 20);
        const double c0 = g.normal(5), c1 = g.normal(5), c2 = g.normal(5);
        LocalFitConfig cfg;
        cfg.kernel = detail::random_kernel(g);
        cfg.bandwidth = len * g.uniform(0.05, 2.0);
        cfg.bandwidth2 = g.coin() ? 0.0 : len * g.uniform(0.05, 2.0);
        const int n = g.integer(2, 60);
        const double s = g.uniform(lo, lo + len), t = g.uniform(lo, lo + len);
        double err;
        std::ostringstream os;
        if (g.coin()) {
          std::vector<Point1> pts;
          for (int i = 0; i < n; ++i) {
            const double x = g.uniform(lo, lo + len);
            pts.push_back({x, c0 + c1 * x});
          }
          const double truth = c0 + c1 * s;
          err = std::abs(LocalLinear1D(pts).at(s, cfg) - truth) / (1e-9 * (1 + std::abs(c0) + std::abs(c1) * (std::abs(lo) + len)));
          os << "1-D n=" << n << " h=" << cfg.bandwidth << " at " << s;
        } else {
          std::vector<Point2> pts;
          for (int i = 0; i < n + 2; ++i) {
            const double x1 = g.uniform(lo, lo + len), x2 = g.uniform(lo, lo + len);
            pts.push_back({x1, x2, c0 + c1 * x1 + c2 * x2});
          }
          const double truth = c0 + c1 * s + c2 * t;
          const double scale = 1 + std::abs(c0) + (std::abs(c1) + std::abs(c2)) * (std::abs(lo) + len);
          err = std::abs(LocalLinear2D(pts).at(s, t, cfg) - truth) / (1e-9 * scale);
          os << "2-D n=" << n + 2 << " h=" << cfg.bandwidth << "," << cfg.second() << " at " << s << "," << t;
        }
        what = os.str();
        return err;
      },
      seed);
}

// Σ_p ω_{q,r+1}(z_p, z, b) f(z_p) = f^{(q)}(z) for polynomials of degree ≤ r.
inline PropertyResult lp_weight_moments(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const int r = g.integer(1, 3), q = g.integer(0, r);
        const int P = g.integer(r + 1, 14);
        std::vector<double> centers;
        if (g.coin()) {
          for (int p = 0; p < P; ++p) centers.push_back((p + 0.5) / P);
        } else {
          for (int p = 0; p < P; ++p) centers.push_back(g.uniform(0, 1));
          std::sort(centers.begin(), centers.end());
        }
        const double z = g.uniform(0, 1), b = g.uniform(0.05, 1.5);
        std::vector<double> coef(static_cast<std::size_t>(r) + 1);
        for (auto& c : coef) c = g.normal();
        const auto f = [&](double x, int deriv) {
          double v = 0;
          for (int d = deriv; d <= r; ++d) {
            double fall = 1;
            for (int j = 0; j < deriv; ++j) fall *= d - j;
            v += coef[static_cast<std::size_t>(d)] * fall * std::pow(x, d - deriv);
          }
          return v;
        };
        const Kernel1D k = detail::random_kernel(g);
        const auto w = lp_weights(q, r, centers, z, b, k);
        double est = 0, mag = 1;
        for (int p = 0; p < P; ++p) {
          est += w[static_cast<std::size_t>(p)] * f(centers[static_cast<std::size_t>(p)], 0);
          mag += std::abs(w[static_cast<std::size_t>(p)] * f(centers[static_cast<std::size_t>(p)], 0));
        }
        std::ostringstream os;
        os << "q=" << q << " r=" << r << " P=" << P << " z=" << z << " b=" << b << " kernel=" << to_string(k.family);
        what = os.str();
        return std::abs(est - f(z, q)) / (1e-9 * mag);
      },
      seed);
}

// eigendecompose returns orthonormal eigenfunctions, positive non-increasing
// eigenvalues and the nonnegative-integral sign convention.
inline PropertyResult eigen_orthonormality(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const Grid grid = detail::random_grid(g, 5, 80);
        const int rank = g.integer(1, 7);
        const auto surface = detail::random_covariance(g, grid, rank);
        const auto eig = eigendecompose(surface, grid, static_cast<std::size_t>(g.integer(1, 8)));
        double err = 0;
        for (std::size_t a = 0; a < eig.size(); ++a) {
          for (std::size_t b = a; b < eig.size(); ++b)
            err = std::max(err, std::abs(inner_product(eig.functions[a], eig.functions[b]) - (a == b)) / 1e-8);
          const auto v = eig.values[static_cast<Eigen::Index>(a)];
          if (!(v > 0) || (a > 0 && v > eig.values[static_cast<Eigen::Index>(a - 1)])) err = 1e300;
          if (integrate(eig.functions[a]) < -1e-12) err = 1e300;
        }
        if (eig.size() == 0) err = 1e300;
        what = "grid " + std::to_string(grid.size()) + " rank " + std::to_string(rank);
        return err;
      },
      seed);
}

// raw_beta is unchanged when any eigenfunction flips sign together with
// the matching row or column of σ̃_mk.
inline PropertyResult raw_beta_sign_flip(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const Grid sg = detail::random_grid(g, 5, 40), tg = detail::random_grid(g, 5, 40);
        auto bin = detail::random_bin(g, sg, tg, static_cast<std::size_t>(g.integer(1, 5)),
                                      static_cast<std::size_t>(g.integer(1, 5)));
        const std::size_t M = static_cast<std::size_t>(g.integer(1, static_cast<int>(bin.eig_x.size())));
        const std::size_t K = static_cast<std::size_t>(g.integer(1, static_cast<int>(bin.eig_y.size())));
        const auto ref = raw_beta(bin, M, K);
        for (std::size_t m = 0; m < bin.eig_x.size(); ++m)
          if (g.coin()) {
            bin.eig_x.functions[m].values *= -1;
            bin.sigma_mk.row(static_cast<Eigen::Index>(m)) *= -1;
          }
        for (std::size_t k = 0; k < bin.eig_y.size(); ++k)
          if (g.coin()) {
            bin.eig_y.functions[k].values *= -1;
            bin.sigma_mk.col(static_cast<Eigen::Index>(k)) *= -1;
          }
        what = "M=" + std::to_string(M) + " K=" + std::to_string(K);
        return detail::max_abs(raw_beta(bin, M, K).values - ref.values) / (1e-12 * (1 + detail::max_abs(ref.values)));
      },
      seed);
}

// With identical raw estimates in every bin, refine returns them at any z.
inline PropertyResult refine_constant_reproduction(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const Grid sg = detail::random_grid(g, 3, 30), tg = detail::random_grid(g, 3, 30);
        const auto P = static_cast<std::size_t>(g.integer(2, 12));
        const auto model = detail::model_with_bins(g, P, sg, tg, true);
        const double z = g.coin() ? g.uniform(0, 1) : static_cast<double>(g.integer(0, 1));
        const auto est = refine(model, z);
        const auto& b = model.bins.front();
        const double scale = 1e-10 * (1 + detail::max_abs(b.raw_beta.values) + detail::max_abs(b.mean_x.values) +
                                      detail::max_abs(b.mean_y.values));
        what = "P=" + std::to_string(P) + " z=" + std::to_string(z) + " b=" + std::to_string(model.refine.bandwidth);
        return std::max({detail::max_abs(est.beta.values - b.raw_beta.values),
                         detail::max_abs(est.mean_x.values - b.mean_x.values),
                         detail::max_abs(est.mean_y.values - b.mean_y.values)}) /
               scale;
      },
      seed);
}

// predict(αU₁ + (1−α)U₂) = α predict(U₁) + (1−α) predict(U₂) at shared times.
inline PropertyResult predict_affinity(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        const Grid sg = detail::random_grid(g, 5, 40), tg = detail::random_grid(g, 3, 30);
        const auto P = static_cast<std::size_t>(g.integer(1, 8));
        const auto model = detail::model_with_bins(g, P, sg, tg, false);
        const bool dense = g.coin();
        std::vector<double> times;
        if (dense) {
          for (std::size_t j = 0; j < sg.size(); ++j) times.push_back(sg.abscissae[static_cast<Eigen::Index>(j)]);
        } else {
          const int L = g.integer(1, 6);
          for (int l = 0; l < L; ++l) times.push_back(g.uniform(sg.lower, sg.lower + 0.4 * sg.length()));
          std::sort(times.begin(), times.end());
        }
        const double alpha = g.uniform(-1, 2), z = g.uniform(0, 1);
        std::vector<Observation> u1, u2, mix;
        for (double t : times) {
          const double a = g.normal(3), b = g.normal(3);
          u1.push_back({t, a});
          u2.push_back({t, b});
          mix.push_back({t, alpha * a + (1 - alpha) * b});
        }
        const auto p1 = predict(model, u1, z), p2 = predict(model, u2, z), pm = predict(model, mix, z);
        const Eigen::VectorXd combo = alpha * p1.y_hat.values + (1 - alpha) * p2.y_hat.values;
        what = std::string(dense ? "dense" : "sparse") + " P=" + std::to_string(P) + " L=" + std::to_string(times.size());
        if (p1.dense != dense || pm.dense != dense) return 1e300;
        const double scale = 1e-9 * (1 + detail::max_abs(p1.y_hat.values) + detail::max_abs(p2.y_hat.values)) *
                             (1 + std::abs(alpha));
        return detail::max_abs(pm.y_hat.values - combo) / scale;
      },
      seed);
}

// A one-bin varying-coefficient fit is the global fit.
inline PropertyResult single_bin_equals_global(std::size_t cases, std::uint64_t seed) {
  return detail::run_cases(
      cases,
      [](Gen& g, std::string& what) {
        SimDesign design;
        design.sampling = g.coin() ? Sampling::sparse : Sampling::regular;
        design.regular_points = static_cast<std::size_t>(g.integer(8, 16));
        const auto n = static_cast<std::size_t>(g.integer(12, 30));
        const auto sim = generate(design, n, g.engine()(), Grid::point(0));
        FitConfig cfg;
        cfg.s_points = static_cast<std::size_t>(g.integer(5, 15));
        cfg.t_points = static_cast<std::size_t>(g.integer(5, 15));
        cfg.cross_validate = false;
        cfg.max_components = static_cast<std::size_t>(g.integer(1, 4));
        cfg.criterion = g.coin() ? Criterion::aic : Criterion::bic;
        cfg.kernel = detail::random_kernel(g);
        cfg.bins.count = 1;
        cfg.min_occupancy = 1;
        if (g.coin()) {
          BinBandwidths bw;
          bw.mean_x = bw.mean_y = g.uniform(0.8, 3);
          bw.cov_x = bw.cov_y = bw.cross_s = bw.cross_t = g.uniform(1.5, 4);
          bw.var_x = bw.var_y = g.uniform(0.8, 3);
          cfg.smoother_bandwidths = bw;
        }
        const auto a = fit(sim.data, cfg);
        const auto b = fit_global(sim.data, cfg);
        what = to_string(design.sampling) + " n=" + std::to_string(n);
        double err = 0;
        if (a.M != b.M || a.K != b.K || a.sigma2_x != b.sigma2_x || a.sigma2_y != b.sigma2_y) return 1e300;
        err = std::max(err, detail::max_abs(a.bins[0].raw_beta.values - b.bins[0].raw_beta.values) / 1e-12);
        std::vector<Observation> x;
        for (const auto& o : sim.data.subjects.front().x_obs) x.push_back(o);
        const double z = g.uniform(0, 1);
        err = std::max(err, detail::max_abs(predict(a, x, z).y_hat.values - predict(b, x, z).y_hat.values) / 1e-12);
        return err;
      },
      seed);
}

struct NamedProperty {
  const char* name;
  PropertyResult (*run)(std::size_t, std::uint64_t);
};

inline const std::vector<NamedProperty>& all_properties() {
  static const std::vector<NamedProperty> list{
      {"smoother affine exactness", smoother_affine_exactness},
      {"lp_weights moment conditions", lp_weight_moments},
      {"eigenfunction orthonormality", eigen_orthonormality},
      {"raw slope sign-flip invariance", raw_beta_sign_flip},
      {"refine constant reproduction", refine_constant_reproduction},
      {"predict affinity", predict_affinity},
      {"one-bin fit equals global fit", single_bin_equals_global},
  };
  return list;
}

}  // namespace vcflr::test
