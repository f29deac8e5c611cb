#pragma once

#include <array>
#include <cmath>

#include <Eigen/Geometry>

#include "ipe/core/scene.hpp"

namespace ipe::dynamics {

using Mat3 = Eigen::Matrix3d;

/// Cube rigid body. A cube's inertia tensor is isotropic, so the world-frame
/// inverse inertia is a scalar multiple of the identity at any orientation.
struct RigidBody {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double mass = 1.0;
  double side = 1.0;

  double half() const { return 0.5 * side; }
  double inertia() const { return mass * side * side / 6.0; }
  double inv_mass() const { return 1.0 / mass; }
  double inv_inertia() const { return 1.0 / inertia(); }
  Mat3 rotation() const { return orientation.toRotationMatrix(); }

  Vec3 velocity_at(const Vec3& world_point) const
  {
    return linear_velocity + angular_velocity.cross(world_point - position);
  }

  std::array<Vec3, 8> corners() const
  {
    const Mat3 r = rotation();
    const double h = half();
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
      const Vec3 local((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h);
      out[static_cast<std::size_t>(i)] = position + r * local;
    }
    return out;
  }

  double kinetic_energy() const
  {
    return 0.5 * mass * linear_velocity.squaredNorm() + 0.5 * inertia() * angular_velocity.squaredNorm();
  }

  static RigidBody from_block(const Block& block)
  {
    RigidBody body;
    body.position = block.center;
    body.orientation = block.orientation.normalized();
    body.mass = block.mass();
    body.side = block.side;
    return body;
  }
};

}  // namespace ipe::dynamics
