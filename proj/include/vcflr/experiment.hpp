#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vcflr/regression.hpp"
#include "vcflr/simulation.hpp"

namespace vcflr {

struct ExperimentConfig {
  SimDesign design;
  std::size_t n_train = 400;
  std::size_t n_test = 200;
  std::size_t reps = 10;
  std::uint64_t seed = 1;
  std::size_t test_points = 101;
  FitConfig fit;
};

struct RepResult {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mispe_global = 0.0;
  double mispe_varying = 0.0;
  FittedModel varying;  // kept for slope dumps
};

/// Seed of repetition r derived from the base seed.
std::uint64_t rep_seed(std::uint64_t base, std::size_t rep);

/// One repetition: generate, fit both models, predict the test set, score.
/// Library errors are caught and reported in the result.
RepResult run_rep(const ExperimentConfig& config, std::size_t rep);

/// All repetitions in order; `on_rep` (optional) sees each result as it lands.
std::vector<RepResult> run_experiment(const ExperimentConfig& config,
                                      const std::function<void(const RepResult&)>& on_rep = {});

}  // namespace vcflr
