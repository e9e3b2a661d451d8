#include "vcflr/experiment.hpp"

#include "vcflr/error.hpp"

namespace vcflr {

std::uint64_t rep_seed(std::uint64_t base, std::size_t rep) {
  return base * 1000003ULL + static_cast<std::uint64_t>(rep);
}

namespace {

double score(const FittedModel& model, const SimData& test) {
  std::vector<GridFunction> preds;
  preds.reserve(test.data.size());
  for (const auto& s : test.data.subjects) preds.push_back(predict(model, s.x_obs, s.z).y_hat);
  return mispe(test.truth, preds);
}

}  // namespace

RepResult run_rep(const ExperimentConfig& config, std::size_t rep) {
  RepResult out;
  out.rep = rep;
  out.seed = rep_seed(config.seed, rep);
  try {
    const Grid truth_grid = make_grid(SimDesign::lower, SimDesign::upper, config.fit.t_points);
    const SimData train = generate(config.design, config.n_train, out.seed, truth_grid);
    const SimData test = generate_test(config.design, config.n_test, out.seed, truth_grid, config.test_points);
    const FittedModel global = fit_global(train.data, config.fit);
    out.varying = fit(train.data, config.fit);
    out.mispe_global = score(global, test);
    out.mispe_varying = score(out.varying, test);
    out.ok = true;
  } catch (const Error& e) {
    out.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return out;
}

std::vector<RepResult> run_experiment(const ExperimentConfig& config,
                                      const std::function<void(const RepResult&)>& on_rep) {
  std::vector<RepResult> out;
  for (std::size_t r = 0; r < config.reps; ++r) {
    out.push_back(run_rep(config, r));
    if (on_rep) on_rep(out.back());
  }
  return out;
}

}  // namespace vcflr
