#pragma once

// The simulation-based stability predictor: run an ensemble of noisy,
// perturbed simulations from a scene estimate and summarize how often the
// stack falls.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ipe/core/random.hpp"
#include "ipe/core/scene.hpp"
#include "ipe/dynamics/simulate.hpp"

namespace ipe {

struct IpeParams {
  double sigma = 0.1;
  double phi = 40.0;
  int n_sims = 20;
  double force_per_block = 10.0;
  double decision_threshold = 0.5;
  double moved_threshold = 0.2;
  /// When set, each simulation uses force_per_block x (block count of the
  /// state it simulates) instead of phi.
  bool scale_phi_by_block_count = false;

  void validate() const
  {
    if (!(sigma >= 0.0))
      throw std::invalid_argument("IpeParams: sigma must be >= 0");
    if (!(phi >= 0.0))
      throw std::invalid_argument("IpeParams: phi must be >= 0");
    if (n_sims < 1)
      throw std::invalid_argument("IpeParams: n_sims must be >= 1");
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
      throw std::invalid_argument("IpeParams: decision_threshold must be in (0, 1)");
  }
};

struct IpePrediction {
  double p_fall = 0.0;
  double graded_response = 0.0;
  std::vector<dynamics::SimOutcome> outcomes;
};

enum class StabilityLabel { stable, unstable };

inline const char* to_string(StabilityLabel label) { return label == StabilityLabel::stable ? "stable" : "unstable"; }

inline StabilityLabel label_of(bool stable) { return stable ? StabilityLabel::stable : StabilityLabel::unstable; }

/// Perturbation magnitude proportional to the number of blocks.
inline double scale_phi(int n_blocks, const IpeParams& params)
{
  if (n_blocks < 2)
    throw std::invalid_argument("scale_phi: n_blocks must be >= 2");
  return params.force_per_block * n_blocks;
}

/// A single scene estimate, or posterior samples to draw initial states from.
using SceneSource = std::variant<SceneState, std::vector<SceneState>>;

inline IpePrediction summarize(std::vector<dynamics::SimOutcome> outcomes, const IpeParams& params)
{
  IpePrediction pred;
  int falls = 0;
  double moved_sum = 0.0;
  for (const dynamics::SimOutcome& o : outcomes) {
    falls += o.fell ? 1 : 0;
    int moved = 0;
    for (double d : o.per_block_displacement)
      moved += d > params.moved_threshold ? 1 : 0;
    moved_sum += o.per_block_displacement.empty()
                     ? 0.0
                     : static_cast<double>(moved) / static_cast<double>(o.per_block_displacement.size());
  }
  const auto n = static_cast<double>(outcomes.size());
  pred.p_fall = static_cast<double>(falls) / n;
  pred.graded_response = moved_sum / n;
  pred.outcomes = std::move(outcomes);
  return pred;
}

/// Simulation k uses sub-seed derive_seed(seed, k); its noise and push
/// directions are independent of sigma and phi, so predictions at different
/// noise settings share random numbers.
inline IpePrediction ipe_predict(const SceneSource& source, const IpeParams& params,
                                 const dynamics::SimConfig& sim_config, std::uint64_t seed)
{
  params.validate();
  const std::vector<SceneState>* samples = std::get_if<std::vector<SceneState>>(&source);
  if (samples != nullptr && samples->empty())
    throw std::invalid_argument("ipe_predict: empty posterior sample set");

  std::vector<dynamics::SimOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(params.n_sims));

  // Without noise or push every member of the ensemble is the same run.
  if (samples == nullptr && params.sigma == 0.0 && params.phi == 0.0 && !params.scale_phi_by_block_count) {
    const dynamics::SimOutcome once =
        dynamics::simulate_scene(std::get<SceneState>(source), sim_config, 0.0, 0.0, derive_seed(seed, 0x5137, 0));
    outcomes.assign(static_cast<std::size_t>(params.n_sims), once);
    return summarize(std::move(outcomes), params);
  }

  for (int k = 0; k < params.n_sims; ++k) {
    const std::uint64_t sub = derive_seed(seed, 0x5137, static_cast<std::uint64_t>(k));
    const SceneState* state = std::get_if<SceneState>(&source);
    if (samples != nullptr) {
      Rng pick = make_rng(derive_seed(sub, 3));
      state = &(*samples)[uniform_index(pick, samples->size())];
    }
    const double phi =
        params.scale_phi_by_block_count ? scale_phi(static_cast<int>(state->size()), params) : params.phi;
    try {
      outcomes.push_back(dynamics::simulate_scene(*state, sim_config, phi, params.sigma, sub));
    } catch (const dynamics::SimulationDivergence& e) {
      throw dynamics::SimulationDivergence(std::string(e.what()) + " [ensemble member " + std::to_string(k) + "]");
    }
  }
  return summarize(std::move(outcomes), params);
}

/// Unstable iff p_fall >= threshold (a tie at the threshold reads unstable).
inline StabilityLabel ipe_classify(const IpePrediction& pred, const IpeParams& params)
{
  return pred.p_fall >= params.decision_threshold ? StabilityLabel::unstable : StabilityLabel::stable;
}

}  // namespace ipe
