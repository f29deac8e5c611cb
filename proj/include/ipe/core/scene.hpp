#pragma once

// Block-stack scenes: generation, the exact center-of-mass stability rule,
// visual instability, stddev calibration and balanced boundary stacks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "ipe/core/random.hpp"

namespace ipe {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Block {
  Vec3 center = Vec3::Zero();
  double side = 1.0;
  double density = 500.0;
  Quat orientation = Quat::Identity();

  double mass() const { return density * side * side * side; }
  Vec2 horizontal() const { return center.head<2>(); }
};

struct SceneState {
  std::vector<Block> blocks;  // bottom to top
  double field_half_extent = 15.0;
  double field_height = 4.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return blocks.size(); }
  bool empty() const { return blocks.empty(); }
  bool operator==(const SceneState& other) const;
};

inline bool SceneState::operator==(const SceneState& other) const
{
  if (blocks.size() != other.blocks.size() || seed != other.seed)
    return false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& a = blocks[i];
    const Block& b = other.blocks[i];
    if (a.center != b.center || a.side != b.side || a.density != b.density ||
        a.orientation.coeffs() != b.orientation.coeffs())
      return false;
  }
  return field_half_extent == other.field_half_extent && field_height == other.field_height;
}

class GenParams {
public:
  GenParams(int n_blocks, double horizontal_stddev, std::uint64_t rng_seed)
      : n_blocks_(n_blocks), stddev_(horizontal_stddev), seed_(rng_seed)
  {
    if (n_blocks < 2)
      throw std::invalid_argument("GenParams: n_blocks must be >= 2, got " + std::to_string(n_blocks));
    if (!(horizontal_stddev >= 0.0) || !std::isfinite(horizontal_stddev))
      throw std::invalid_argument("GenParams: horizontal_stddev must be finite and >= 0");
  }

  int n_blocks() const { return n_blocks_; }
  double horizontal_stddev() const { return stddev_; }
  std::uint64_t rng_seed() const { return seed_; }

private:
  int n_blocks_;
  double stddev_;
  std::uint64_t seed_;
};

/// Builds a one-block-per-level stack from horizontal centers (bottom first).
inline SceneState stack_from_horizontal(const std::vector<Vec2>& xy, double side = 1.0, double density = 500.0)
{
  SceneState scene;
  scene.blocks.reserve(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    Block b;
    b.side = side;
    b.density = density;
    b.center = Vec3(xy[i].x(), xy[i].y(), (static_cast<double>(i) + 0.5) * side);
    scene.blocks.push_back(b);
  }
  return scene;
}

/// Horizontal offsets of each block from its predecessor are drawn per axis
/// from N(0, stddev^2); the bottom block sits at the origin.
inline SceneState generate_scene(const GenParams& params)
{
  Rng rng = make_rng(params.rng_seed());
  std::vector<Vec2> xy(static_cast<std::size_t>(params.n_blocks()));
  xy[0] = Vec2::Zero();
  for (std::size_t i = 1; i < xy.size(); ++i) {
    const double dx = standard_normal(rng);
    const double dy = standard_normal(rng);
    xy[i] = xy[i - 1] + params.horizontal_stddev() * Vec2(dx, dy);
  }
  SceneState scene = stack_from_horizontal(xy);
  scene.seed = params.rng_seed();
  return scene;
}

struct StabilityReport {
  std::vector<bool> per_block_falls;
  bool stable = true;
};

namespace detail {

inline void require_generated_form(const SceneState& scene, const char* who)
{
  if (scene.blocks.empty())
    throw std::invalid_argument(std::string(who) + ": empty scene");
  for (std::size_t i = 0; i < scene.blocks.size(); ++i) {
    const Block& b = scene.blocks[i];
    if (!b.orientation.isApprox(Quat::Identity(), 1e-12) &&
        !b.orientation.coeffs().isApprox(-Quat::Identity().coeffs(), 1e-12))
      throw std::invalid_argument(std::string(who) + ": block " + std::to_string(i) +
                                  " is rotated; rule defined for axis-aligned stacks only");
    if (i > 0 && !(b.center.z() > scene.blocks[i - 1].center.z()))
      throw std::invalid_argument(std::string(who) + ": blocks not ordered by height");
  }
}

/// Mass-weighted horizontal center of blocks [first, size).
inline Vec2 horizontal_com(const SceneState& scene, std::size_t first)
{
  Vec2 acc = Vec2::Zero();
  double total = 0.0;
  for (std::size_t j = first; j < scene.blocks.size(); ++j) {
    acc += scene.blocks[j].mass() * scene.blocks[j].horizontal();
    total += scene.blocks[j].mass();
  }
  return acc / total;
}

}  // namespace detail

/// Block i falls iff the center of mass of blocks i..top projects outside
/// the top face of block i-1. The bottom block rests on the ground.
inline StabilityReport analytic_stability(const SceneState& scene)
{
  detail::require_generated_form(scene, "analytic_stability");
  StabilityReport report;
  report.per_block_falls.assign(scene.blocks.size(), false);
  for (std::size_t i = 1; i < scene.blocks.size(); ++i) {
    const Vec2 com = detail::horizontal_com(scene, i);
    const Block& support = scene.blocks[i - 1];
    const Vec2 offset = (com - support.horizontal()).cwiseAbs();
    const double half = 0.5 * support.side;
    if (offset.x() > half || offset.y() > half) {
      report.per_block_falls[i] = true;
      report.stable = false;
    }
  }
  return report;
}

struct VisualInstability {
  double score = 0.0;
};

/// 10 x the largest horizontal distance between a block and the center of
/// mass of everything strictly above it, clipped to [0, 5].
inline VisualInstability visual_instability(const SceneState& scene)
{
  detail::require_generated_form(scene, "visual_instability");
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < scene.blocks.size(); ++i) {
    const Vec2 com = detail::horizontal_com(scene, i + 1);
    worst = std::max(worst, (com - scene.blocks[i].horizontal()).norm());
  }
  return {std::clamp(10.0 * worst, 0.0, 5.0)};
}

inline constexpr std::uint64_t kCalibrationSeed = 0x1be5ca1b0a7eULL;

/// Generation stddev giving P(stable) closest to 0.5 for n_blocks.
///
/// The Monte Carlo draws are fixed up front and scaled by the candidate
/// stddev, so the estimated stable fraction is monotone in stddev and plain
/// bisection applies.
inline double calibrate_stddev(int n_blocks, int n_scenes = 10000, std::uint64_t seed = kCalibrationSeed)
{
  if (n_blocks < 2)
    throw std::invalid_argument("calibrate_stddev: n_blocks must be >= 2");
  if (n_scenes < 1)
    throw std::invalid_argument("calibrate_stddev: n_scenes must be >= 1");

  const auto n = static_cast<std::size_t>(n_blocks);
  std::vector<Vec2> unit_offsets(static_cast<std::size_t>(n_scenes) * (n - 1));
  Rng rng = make_rng(seed);
  for (Vec2& o : unit_offsets) {
    const double dx = standard_normal(rng);
    const double dy = standard_normal(rng);
    o = Vec2(dx, dy);
  }

  std::vector<Vec2> xy(n);
  auto stable_fraction = [&](double stddev) {
    int stable = 0;
    for (int s = 0; s < n_scenes; ++s) {
      xy[0] = Vec2::Zero();
      for (std::size_t i = 1; i < n; ++i)
        xy[i] = xy[i - 1] + stddev * unit_offsets[static_cast<std::size_t>(s) * (n - 1) + i - 1];
      bool ok = true;
      for (std::size_t i = 1; i < n && ok; ++i) {
        Vec2 com = Vec2::Zero();
        for (std::size_t j = i; j < n; ++j)
          com += xy[j];
        com /= static_cast<double>(n - i);
        const Vec2 off = (com - xy[i - 1]).cwiseAbs();
        ok = off.x() <= 0.5 && off.y() <= 0.5;
      }
      stable += ok ? 1 : 0;
    }
    return static_cast<double>(stable) / n_scenes;
  };

  double lo = 0.01;
  double hi = 2.0;
  if (stable_fraction(lo) < 0.5 || stable_fraction(hi) > 0.5)
    throw std::runtime_error("calibrate_stddev: [0.01, 2.0] m does not bracket P(stable) = 0.5");
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (stable_fraction(mid) >= 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Default generation stddev for n blocks: the documented 0.29 m for four
/// blocks, calibrated otherwise.
inline double default_stddev(int n_blocks) { return n_blocks == 4 ? 0.29 : calibrate_stddev(n_blocks); }

struct BoundaryParams {
  int level = 1;  // 1..4
  bool stable = true;
  int n_blocks = 4;
  double proposal_stddev = 2.0 * 0.29;
  int attempt_budget = 100000;
};

/// Rejection-samples a scene whose stability label and floor(visual
/// instability) match the request.
inline SceneState generate_boundary_scene(const BoundaryParams& params, std::uint64_t seed)
{
  if (params.level < 1 || params.level > 4)
    throw std::invalid_argument("generate_boundary_scene: level must be in 1..4");
  for (int attempt = 0; attempt < params.attempt_budget; ++attempt) {
    const std::uint64_t scene_seed = derive_seed(seed, 0xb0da, static_cast<std::uint64_t>(attempt));
    SceneState scene = generate_scene(GenParams(params.n_blocks, params.proposal_stddev, scene_seed));
    if (analytic_stability(scene).stable != params.stable)
      continue;
    if (static_cast<int>(std::floor(visual_instability(scene).score)) != params.level)
      continue;
    return scene;
  }
  throw std::runtime_error("generate_boundary_scene: no scene at level " + std::to_string(params.level) +
                           " within " + std::to_string(params.attempt_budget) + " attempts");
}

}  // namespace ipe
