#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipe/core/random.hpp"
#include "ipe/core/scene.hpp"
#include "ipe/dynamics/world.hpp"

namespace ipe::dynamics {

/// Horizontal push on the bottom face center of the bottom block. The
/// direction is piecewise constant, redrawn uniformly at resample_hz.
struct PerturbationSchedule {
  double magnitude_phi = 0.0;
  double window_start = 0.0;
  double window_end = 1.0;
  double resample_hz = 50.0;
  std::vector<double> direction_angles;
  /// Reflects the force in x (exactly, without re-deriving angles).
  bool mirror_x = false;

  static PerturbationSchedule sample(double phi, std::uint64_t seed, double window_end = 1.0, double resample_hz = 50.0)
  {
    if (phi < 0.0)
      throw std::invalid_argument("PerturbationSchedule: phi must be >= 0");
    PerturbationSchedule s;
    s.magnitude_phi = phi;
    s.window_end = window_end;
    s.resample_hz = resample_hz;
    const auto count = static_cast<std::size_t>(std::llround(resample_hz * (window_end - s.window_start)));
    s.direction_angles.resize(count);
    Rng rng = make_rng(seed);
    for (double& a : s.direction_angles)
      a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return s;
  }

  /// Zero outside the active window or when phi == 0.
  Vec3 force_at(double t) const
  {
    if (magnitude_phi == 0.0 || direction_angles.empty() || t < window_start || t >= window_end)
      return Vec3::Zero();
    auto slot = static_cast<std::size_t>(std::floor((t - window_start) * resample_hz + 1e-9));
    slot = std::min(slot, direction_angles.size() - 1);
    const double a = direction_angles[slot];
    const double fx = magnitude_phi * std::cos(a);
    return Vec3(mirror_x ? -fx : fx, magnitude_phi * std::sin(a), 0.0);
  }

  PerturbationSchedule mirrored_x() const
  {
    PerturbationSchedule m = *this;
    m.mirror_x = !mirror_x;
    return m;
  }
};

struct SimOutcome {
  bool fell = false;
  double top_block_z_drop = 0.0;
  std::vector<double> per_block_displacement;
  int steps_executed = 0;

  bool operator==(const SimOutcome&) const = default;
};

inline constexpr double kFallDrop = 0.2;

/// Per-step observer: (step index, time after the step, bodies).
using TrajectoryObserver = std::function<void(int, double, const std::vector<RigidBody>&)>;

/// Runs a prepared set of bodies (index 0 = bottom, last = top) for the
/// configured duration and summarizes the result.
inline SimOutcome run_bodies(std::vector<RigidBody> bodies, const SimConfig& config,
                             const PerturbationSchedule& perturbation, const TrajectoryObserver& observer = {})
{
  if (bodies.empty())
    throw std::invalid_argument("run_bodies: no bodies");
  const std::vector<Vec3> initial = [&] {
    std::vector<Vec3> p;
    for (const RigidBody& b : bodies)
      p.push_back(b.position);
    return p;
  }();
  const int steps = config.step_count();
  World world(std::move(bodies), config);
  std::vector<ExternalForce> forces;
  int executed = 0;
  int resting = 0;
  for (int s = 0; s < steps; ++s) {
    const double t = s * config.dt;
    forces.clear();
    const Vec3 f = perturbation.force_at(t);
    if (f != Vec3::Zero()) {
      const RigidBody& bottom = world.bodies().front();
      const Vec3 point = bottom.position + bottom.rotation() * Vec3(0.0, 0.0, -bottom.half());
      forces.push_back({0, f, point});
    }
    world.step(forces);
    ++executed;
    if (observer)
      observer(s, t + config.dt, world.bodies());

    if (config.rest_exit && (t + config.dt >= perturbation.window_end || perturbation.magnitude_phi == 0.0)) {
      bool still = true;
      for (const RigidBody& b : world.bodies())
        still = still && b.linear_velocity.norm() < config.rest_speed && b.angular_velocity.norm() < config.rest_speed;
      resting = still ? resting + 1 : 0;
      if (resting >= config.rest_steps)
        break;
    }
  }

  SimOutcome out;
  out.steps_executed = executed;
  const auto& final_bodies = world.bodies();
  for (std::size_t i = 0; i < final_bodies.size(); ++i)
    out.per_block_displacement.push_back((final_bodies[i].position - initial[i]).norm());
  out.top_block_z_drop = initial.back().z() - final_bodies.back().position.z();
  out.fell = std::abs(out.top_block_z_drop) > kFallDrop;
  return out;
}

/// Bodies for a scene after adding i.i.d. horizontal N(0, sigma^2) per-axis
/// noise to every block position.
inline std::vector<RigidBody> noisy_bodies(const SceneState& scene, double position_noise_sigma, Rng& rng)
{
  std::vector<RigidBody> bodies;
  bodies.reserve(scene.blocks.size());
  for (const Block& block : scene.blocks) {
    RigidBody b = RigidBody::from_block(block);
    const double dx = standard_normal(rng);
    const double dy = standard_normal(rng);
    b.position.x() += position_noise_sigma * dx;
    b.position.y() += position_noise_sigma * dy;
    bodies.push_back(b);
  }
  return bodies;
}

/// Noisy, perturbed simulation of a scene. Deterministic given the seed:
/// noise and perturbation directions come from separate derived streams, so
/// changing sigma or phi rescales the same underlying draws.
inline SimOutcome simulate_scene(const SceneState& scene, const SimConfig& config, double phi,
                                 double position_noise_sigma, std::uint64_t seed,
                                 const TrajectoryObserver& observer = {})
{
  if (position_noise_sigma < 0.0)
    throw std::invalid_argument("simulate_scene: sigma must be >= 0");
  if (scene.blocks.empty())
    throw std::invalid_argument("simulate_scene: empty scene");
  Rng noise_rng = make_rng(derive_seed(seed, 1));
  std::vector<RigidBody> bodies = noisy_bodies(scene, position_noise_sigma, noise_rng);
  const PerturbationSchedule schedule = PerturbationSchedule::sample(phi, derive_seed(seed, 2));
  try {
    return run_bodies(std::move(bodies), config, schedule, observer);
  } catch (const SimulationDivergence& e) {
    throw SimulationDivergence(std::string(e.what()) + " (scene seed " + std::to_string(scene.seed) +
                               ", simulation seed " + std::to_string(seed) + ")");
  }
}

}  // namespace ipe::dynamics
