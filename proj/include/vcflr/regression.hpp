#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vcflr/data.hpp"
#include "vcflr/model.hpp"

namespace vcflr {

/// β̃(z_p, s, t) = Σ_k Σ_m (σ̃_mk / ρ̃_m) ψ̃_m(s) φ̃_k(t). Throws TruncationTooLarge.
GridSurface raw_beta(const BinEstimate& bin, std::size_t M, std::size_t K);

/// Refinement weights over the bins at covariate value z (a unit weight for
/// single-bin models).
std::vector<double> refine_weights(const FittedModel& model, double z);

struct RefinedEstimate {
  GridFunction mean_x;
  GridFunction mean_y;
  GridSurface beta;
};

RefinedEstimate refine(const FittedModel& model, double z);

struct Prediction {
  double z_star = 0.0;
  GridFunction y_hat;  // one-point grid for a scalar response
  bool dense = true;   // predictor taken as fully observed
};

/// x_obs counts as dense when its largest gap, including the gaps to both
/// domain ends, is at most twice the model's S-grid spacing.
bool is_dense(std::span<const Observation> x_obs, const Grid& s_grid);

/// Ŷ*(t) = μ̂_Y(z*, t) + ∫ β̂(z*, s, t)(X*(s) − μ̂_X(z*, s)) ds. A sparse X* is
/// first reconstructed from conditional-expectation scores on the nearest
/// bin's eigenfunctions. Throws CovariateOutOfDomain.
Prediction predict(const FittedModel& model, std::span<const Observation> x_obs, double z_star);

struct BinSpec {
  std::optional<std::size_t> count;              // fixed P
  std::vector<double> centers;                   // explicit bins (with width)
  double width = 0.0;
  std::vector<std::size_t> candidates{4, 6, 8, 10};  // searched when neither is set
};

struct FitConfig {
  std::size_t s_points = 51;
  std::size_t t_points = 51;
  BinSpec bins;
  std::optional<std::size_t> M;
  std::optional<std::size_t> K;
  std::size_t max_components = 6;
  bool joint_truncation = false;
  std::optional<double> refine_bandwidth;
  std::optional<BinBandwidths> smoother_bandwidths;
  bool cross_validate = true;
  std::size_t cv_folds = 5;
  Criterion criterion = Criterion::bic;
  Criterion binwidth_criterion = Criterion::aic;
  Kernel1D kernel{};
  std::size_t min_occupancy = kDefaultMinOccupancy;
  std::size_t threads = 1;
};

/// Two-step varying-coefficient fit: per-bin raw estimates, then
/// refinement across bins, with any "auto" tuning resolved by selection.
FittedModel fit(const LongitudinalDataset& ds, const FitConfig& config);

/// Non-varying baseline: a single bin whose raw estimates serve every z.
FittedModel fit_global(const LongitudinalDataset& ds, const FitConfig& config);

/// Fit for one given partition (bin count fixed); exposes the bin-width
/// criterion value it attains.
struct CandidateFit {
  FittedModel model;
  double binwidth_score = 0.0;
};
CandidateFit fit_partition(const LongitudinalDataset& ds, const BinPartition& part, const FitConfig& config);

struct BinwidthChoice {
  std::size_t P = 0;
  double b = 0.0;
  CandidateFit best;
  std::vector<SelectionEntry> table;
};

/// Refits for each bin count and keeps the minimiser of deviance(b*) plus
/// 2·M·K·P (AIC) or log(n)·M·K·P (BIC). Counts violating bin occupancy are
/// skipped; ties go to the smaller count.
BinwidthChoice select_binwidth(const LongitudinalDataset& ds, std::span<const std::size_t> candidates,
                               const FitConfig& config);

}  // namespace vcflr
