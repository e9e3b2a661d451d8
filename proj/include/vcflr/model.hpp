#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vcflr/data.hpp"
#include "vcflr/fpca.hpp"
#include "vcflr/grid.hpp"
#include "vcflr/kernels.hpp"

namespace vcflr {

enum class Criterion { aic, bic };

Criterion parse_criterion(std::string_view name);
std::string to_string(Criterion c);

/// Penalty multiplier per effective parameter: 2 for AIC, log n for BIC.
double penalty_weight(Criterion c, std::size_t n);

struct SelectionEntry {
  std::string candidate;
  std::string criterion;
  double score = 0.0;
};

/// Chosen tuning values and the criterion tables they minimise.
struct SelectionReport {
  Criterion criterion = Criterion::bic;           // truncation and refinement bandwidth
  Criterion binwidth_criterion = Criterion::aic;  // bin count
  std::size_t M = 0;
  std::size_t K = 0;
  std::size_t P = 0;
  double b = 0.0;
  std::vector<SelectionEntry> table;
};

/// Cross-bin local polynomial refinement of the raw estimates.
struct RefineConfig {
  int order = 1;
  double bandwidth = 0.0;
  Kernel1D kernel{};
};

inline constexpr int kModelFormatVersion = 1;

struct FittedModel {
  bool scalar_response = false;
  bool global = false;
  Grid s_grid;
  Grid t_grid;
  Domain z_domain;
  BinPartition partition;
  std::vector<BinEstimate> bins;
  RefineConfig refine;
  double sigma2_x = 0.0;
  double sigma2_y = 0.0;
  std::size_t M = 0;
  std::size_t K = 0;
  std::size_t training_subjects = 0;
  SelectionReport report;
};

}  // namespace vcflr
