#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "vcflr/data.hpp"
#include "vcflr/fpca.hpp"
#include "vcflr/model.hpp"
#include "vcflr/smoothing.hpp"

namespace vcflr {

/// Noise variance as used inside the pseudo-likelihood criteria: floored at
/// 1e-6 of the average variance on the covariance diagonal so that a clamped
/// zero estimate keeps log σ² finite.
double criterion_variance(double sigma2, const GridSurface& cov);

/// Deviances for every truncation 1..max_components (fewer when some bin
/// has fewer components); entry k-1 belongs to truncation k.
std::vector<double> truncation_deviances(const LongitudinalDataset& ds, const BinPartition& part,
                                         std::span<const BinEstimate> bins, Stream stream,
                                         std::size_t max_components);

/// Conditional penalised pseudo-deviance of one stream for truncation
/// `components`, summed over bins (penalty excluded):
///   Σ_p Σ_{i∈bin p} ε̃ᵢᵀε̃ᵢ/σ̃²_p + Nᵢ log 2π + Nᵢ log σ̃²_p
/// with ε̃ᵢ the residual after the first `components` conditional-expectation
/// scores. Throws TruncationTooLarge when a bin lacks components.
double truncation_deviance(const LongitudinalDataset& ds, const BinPartition& part,
                           std::span<const BinEstimate> bins, Stream stream, std::size_t components);

struct TruncationChoice {
  std::size_t M = 0;
  std::size_t K = 0;
  std::vector<SelectionEntry> table;
};

/// M from the predictor-side criterion and K from the response-side one,
/// each with penalty 2·P·K (AIC) or log(n)·P·K (BIC); ties go to the smaller
/// truncation. A scalar response fixes K = 1. Candidates exceeding some
/// bin's available components are skipped.
TruncationChoice select_truncation(const LongitudinalDataset& ds, const BinPartition& part,
                                   std::span<const BinEstimate> bins, std::span<const std::size_t> candidates,
                                   Criterion criterion);

/// Joint (M, K) search on the response deviance of the per-bin raw fits,
/// penalised by 2·P·M·K (AIC) or log(n)·P·M·K (BIC).
TruncationChoice select_truncation_joint(const LongitudinalDataset& ds, const BinPartition& part,
                                         std::span<const BinEstimate> bins, std::span<const std::size_t> candidates,
                                         Criterion criterion);

/// Response deviance of the refined fit at refinement bandwidth b (penalty
/// excluded), with σ̂²_Y the bin average. For a scalar response σ̂²_Y is the
/// mean squared residual. Throws InsufficientCenters when b is
/// inadmissible at some subject.
class RefinedDeviance {
 public:
  RefinedDeviance(const LongitudinalDataset& ds, const BinPartition& part, std::span<const BinEstimate> bins,
                  double sigma2_y, std::size_t M, std::size_t K, const Kernel1D& kernel = {});

  /// Deviance with explicit per-subject weights over bins.
  double with_weights(const std::vector<std::vector<double>>& weights) const;

  /// Deviance with local linear weights at bandwidth b.
  double operator()(double b) const;

 private:
  // N_i × L_i map from centred predictor values to the bin's fitted
  // response contribution: Φ σ̃ᵀ Ψᵀ Σ̃_X⁻¹.
  const Eigen::MatrixXd& response_map(std::size_t subject, std::size_t bin) const;

  const LongitudinalDataset& ds_;
  const BinPartition& part_;
  std::span<const BinEstimate> bins_;
  double sigma2_y_;
  std::size_t M_, K_;
  Kernel1D kernel_;
  mutable std::vector<std::vector<std::unique_ptr<Eigen::MatrixXd>>> maps_;
};

/// Geometric grid of `count` bandwidths spanning [h/2, |Z|/2].
std::vector<double> default_refine_candidates(double width, double z_length, std::size_t count = 8);

struct BandwidthChoice {
  double b = 0.0;
  double deviance = 0.0;  // at b, penalty excluded
  std::vector<SelectionEntry> table;
};

/// b*(h) = argmin deviance(b) + pen·tr(SᵀS); inadmissible candidates are
/// skipped, ties go to the larger b. Throws InsufficientCenters when none
/// is admissible.
BandwidthChoice select_bandwidth(const RefinedDeviance& deviance, std::span<const double> centers,
                                 std::span<const double> candidates, Criterion criterion, std::size_t n,
                                 const Kernel1D& kernel = {});

/// K-fold-by-subject cross-validation: group g is held out in fold g mod k.
/// Returns the candidate with least held-out squared error; near-ties (within
/// 1e-9 relative, or roundoff of the held-out data) go to the larger
/// bandwidth. Candidates that cannot be evaluated on some held-out point
/// score +inf. Throws InvalidArgument when
/// there are fewer groups than folds.
LocalFitConfig cv_smoother_bandwidth(const Grouped1D& data, std::size_t folds,
                                     std::span<const LocalFitConfig> candidates,
                                     std::vector<double>* scores = nullptr);
LocalFitConfig cv_smoother_bandwidth(const Grouped2D& data, std::size_t folds,
                                     std::span<const LocalFitConfig> candidates,
                                     std::vector<double>* scores = nullptr);

/// Multipliers of the rule-of-thumb bandwidth tried by cross-validation.
std::vector<double> default_cv_factors();

/// Rule-of-thumb start, refined by k-fold cross-validation over
/// default_cv_factors(). Falls back to the start when too few subjects.
BandwidthRule cv_bandwidth_rule(std::size_t folds, const Kernel1D& kernel = {});

void write_report_csv(std::ostream& out, const SelectionReport& report);

}  // namespace vcflr
