#pragma once

// Metropolis-Hastings over block-stack hypotheses. The chain is generic over
// the log target so the same sampler drives image-based inference and the
// closed-form test targets.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipe/core/random.hpp"
#include "ipe/core/scene.hpp"

namespace ipe::vision {

struct MhConfig {
  int steps = 5000;
  double proposal_stddev_xy = 0.1;
  double pixel_noise_stddev = 0.1;
  double blur_width = 2.0;
  bool infer_block_count = false;
  double block_count_move_prob = 0.1;
  int burn_in = 1000;
  std::uint64_t seed = 0;

  int resolution = 128;
  int initial_block_count = 4;
  int min_blocks = 2;
  int max_blocks = 6;
  /// Prior: bottom block ~ N(0, base^2) per axis, each block's offset from
  /// the one below ~ N(0, offset^2) per axis.
  double prior_base_stddev = 1.0;
  double prior_offset_stddev = 0.29;

  void validate() const
  {
    if (steps <= burn_in || burn_in < 0)
      throw std::invalid_argument("MhConfig: need steps > burn_in >= 0");
    if (block_count_move_prob < 0.0 || block_count_move_prob > 1.0)
      throw std::invalid_argument("MhConfig: block_count_move_prob must be in [0, 1]");
    if (!(proposal_stddev_xy > 0.0) || !(pixel_noise_stddev > 0.0) || !(blur_width > 0.0))
      throw std::invalid_argument("MhConfig: stddevs and blur width must be > 0");
    if (min_blocks < 2 || max_blocks < min_blocks)
      throw std::invalid_argument("MhConfig: need 2 <= min_blocks <= max_blocks");
    if (initial_block_count < min_blocks || initial_block_count > max_blocks)
      throw std::invalid_argument("MhConfig: initial_block_count outside [min_blocks, max_blocks]");
  }
};

enum class MoveKind { shift, birth, death };

struct Proposal {
  SceneState state;
  double log_proposal_ratio = 0.0;  // log q(current | proposed) - log q(proposed | current)
  MoveKind kind = MoveKind::shift;
  bool valid = true;
};

namespace detail {

inline double log_normal2(const Vec2& x, double stddev)
{
  return -x.squaredNorm() / (2.0 * stddev * stddev) - std::log(2.0 * std::numbers::pi * stddev * stddev);
}

inline std::vector<Vec2> horizontal_positions(const SceneState& s)
{
  std::vector<Vec2> xy;
  xy.reserve(s.blocks.size());
  for (const Block& b : s.blocks)
    xy.push_back(b.horizontal());
  return xy;
}

inline SceneState restack(const SceneState& like, const std::vector<Vec2>& xy)
{
  const Block& proto = like.blocks.front();
  SceneState out = stack_from_horizontal(xy, proto.side, proto.density);
  out.seed = like.seed;
  out.field_half_extent = like.field_half_extent;
  out.field_height = like.field_height;
  return out;
}

}  // namespace detail

/// Random-walk kernel. A shift moves one uniformly chosen block by
/// N(0, proposal_stddev_xy^2) per axis. Birth stacks a new block centered on
/// the top block with N(0, prior_offset_stddev^2) per-axis jitter; death
/// removes the top block. Birth and death are equally likely, so their ratio
/// reduces to the jitter density.
inline Proposal propose(const SceneState& current, const MhConfig& cfg, Rng& rng)
{
  Proposal p;
  std::vector<Vec2> xy = detail::horizontal_positions(current);
  const double s = cfg.proposal_stddev_xy;

  const bool count_move = cfg.infer_block_count && uniform01(rng) < cfg.block_count_move_prob;
  if (!count_move) {
    const std::size_t i = uniform_index(rng, xy.size());
    const double dx = standard_normal(rng);
    const double dy = standard_normal(rng);
    xy[i] += s * Vec2(dx, dy);
    p.kind = MoveKind::shift;
    p.state = detail::restack(current, xy);
    return p;
  }

  const int n = static_cast<int>(xy.size());
  if (uniform01(rng) < 0.5) {
    p.kind = MoveKind::birth;
    const double dx = standard_normal(rng);
    const double dy = standard_normal(rng);
    if (n >= cfg.max_blocks) {
      p.valid = false;
      p.state = current;
      return p;
    }
    const Vec2 u = cfg.prior_offset_stddev * Vec2(dx, dy);
    xy.push_back(xy.back() + u);
    p.log_proposal_ratio = -detail::log_normal2(u, cfg.prior_offset_stddev);
  } else {
    p.kind = MoveKind::death;
    if (n <= cfg.min_blocks) {
      p.valid = false;
      p.state = current;
      return p;
    }
    const Vec2 u = xy[xy.size() - 1] - xy[xy.size() - 2];
    xy.pop_back();
    p.log_proposal_ratio = detail::log_normal2(u, cfg.prior_offset_stddev);
  }
  p.state = detail::restack(current, xy);
  return p;
}

inline Proposal propose(const SceneState& current, const MhConfig& cfg, std::uint64_t seed)
{
  Rng rng = make_rng(seed);
  return propose(current, cfg, rng);
}

/// Log density of the generative stack prior (plus a uniform count prior
/// when the block count is inferred).
inline double log_prior(const SceneState& s, const MhConfig& cfg)
{
  const int n = static_cast<int>(s.blocks.size());
  if (n < cfg.min_blocks || n > cfg.max_blocks)
    return -std::numeric_limits<double>::infinity();
  double lp = detail::log_normal2(s.blocks.front().horizontal(), cfg.prior_base_stddev);
  for (std::size_t i = 1; i < s.blocks.size(); ++i)
    lp += detail::log_normal2(s.blocks[i].horizontal() - s.blocks[i - 1].horizontal(), cfg.prior_offset_stddev);
  if (cfg.infer_block_count)
    lp -= std::log(static_cast<double>(cfg.max_blocks - cfg.min_blocks + 1));
  return lp;
}

struct PosteriorSample {
  SceneState state;
  double log_posterior = 0.0;
};

struct ScenePosterior {
  std::vector<PosteriorSample> samples;
  double acceptance_rate = 0.0;
  std::vector<std::string> warnings;

  const PosteriorSample& map_sample() const
  {
    if (samples.empty())
      throw std::logic_error("ScenePosterior: no samples");
    const PosteriorSample* best = &samples.front();
    for (const PosteriorSample& s : samples)
      if (s.log_posterior > best->log_posterior)
        best = &s;
    return *best;
  }

  /// Every `every`-th retained state.
  std::vector<SceneState> thinned(int every = 100) const
  {
    if (every < 1)
      throw std::invalid_argument("thinned: every must be >= 1");
    std::vector<SceneState> out;
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(every))
      out.push_back(samples[i].state);
    return out;
  }

  int block_count_mode() const
  {
    std::map<int, int> counts;
    for (const PosteriorSample& s : samples)
      ++counts[static_cast<int>(s.state.size())];
    int best = 0;
    int best_n = -1;
    for (const auto& [n, c] : counts)
      if (c > best_n) {
        best = n;
        best_n = c;
      }
    return best;
  }
};

/// Metropolis-Hastings with acceptance min(1, exp(delta log target +
/// log proposal ratio)). Non-finite proposals are rejected. Every
/// post-burn-in state is retained.
template <class LogTarget>
ScenePosterior run_mh(const SceneState& initial, LogTarget&& log_target, const MhConfig& cfg)
{
  cfg.validate();
  Rng rng = make_rng(derive_seed(cfg.seed, 0x3a11));
  SceneState current = initial;
  double current_lp = log_target(current);
  if (!std::isfinite(current_lp))
    throw std::invalid_argument("run_mh: initial state has non-finite log target");

  ScenePosterior post;
  post.samples.reserve(static_cast<std::size_t>(cfg.steps - cfg.burn_in));
  int accepted = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Proposal prop = propose(current, cfg, rng);
    const double u = uniform01(rng);
    if (prop.valid) {
      const double lp = log_target(prop.state);
      if (std::isfinite(lp)) {
        const double log_alpha = lp - current_lp + prop.log_proposal_ratio;
        if (log_alpha >= 0.0 || std::log(u) < log_alpha) {
          current = std::move(prop.state);
          current_lp = lp;
          ++accepted;
        }
      }
    }
    if (step >= cfg.burn_in)
      post.samples.push_back({current, current_lp});
  }
  post.acceptance_rate = static_cast<double>(accepted) / cfg.steps;
  if (post.acceptance_rate < 0.05 || post.acceptance_rate > 0.95)
    post.warnings.push_back("acceptance rate " + std::to_string(post.acceptance_rate) +
                            " outside [0.05, 0.95]; proposals poorly tuned");
  return post;
}

}  // namespace ipe::vision
