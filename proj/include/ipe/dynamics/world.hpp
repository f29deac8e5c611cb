#pragma once

// Semi-implicit Euler integrator with a sequential-impulse contact solver.
// Contacts use Baumgarte position feedback, restitution above a small
// approach speed, a per-axis friction box clamped at mu * normal impulse,
// and warm starting from the previous step's matched contacts.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipe/dynamics/body.hpp"
#include "ipe/dynamics/contact.hpp"

namespace ipe::dynamics {

struct SimConfig {
  double dt = 0.01;
  double duration = 2.0;
  double gravity = 9.81;
  double friction_mu = 0.2;
  double restitution = 0.2;
  int solver_iterations = 10;
  double baumgarte_beta = 0.2;
  double penetration_slop = 0.005;
  /// Approach speeds below this bounce inelastically (resting contacts).
  double restitution_threshold = 0.5;
  double max_speed = 100.0;
  /// End a run early once every body has stayed below rest_speed (linear,
  /// m/s, and angular, rad/s) for rest_steps consecutive steps with no
  /// external force pending. Later steps cannot change the outcome.
  bool rest_exit = true;
  double rest_speed = 1e-2;
  int rest_steps = 50;

  int step_count() const
  {
    if (!(dt > 0.0))
      throw std::invalid_argument("SimConfig: dt must be > 0");
    const double steps = duration / dt;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-6 || rounded < 0.0)
      throw std::invalid_argument("SimConfig: duration must be a multiple of dt");
    return static_cast<int>(rounded);
  }
};

class SimulationDivergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Force applied at a world point on one body for the current step.
struct ExternalForce {
  std::size_t body = 0;
  Vec3 force = Vec3::Zero();
  Vec3 point = Vec3::Zero();
};

inline constexpr int kGround = -1;

/// Orthonormal tangent pair for a contact normal. Depends only on the
/// normal, so mirrored contacts get mirrored tangents up to sign.
inline void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2)
{
  if (std::abs(n.x()) < 0.57735) {
    t1 = Vec3::UnitX() - n * n.x();
  } else {
    t1 = Vec3::UnitY() - n * n.y();
  }
  t1.normalize();
  t2 = n.cross(t1);
}

class World {
public:
  World() = default;
  World(std::vector<RigidBody> bodies, SimConfig config) : bodies_(std::move(bodies)), config_(config) {}

  std::vector<RigidBody>& bodies() { return bodies_; }
  const std::vector<RigidBody>& bodies() const { return bodies_; }
  const SimConfig& config() const { return config_; }

  double total_energy() const
  {
    double e = 0.0;
    for (const RigidBody& b : bodies_)
      e += b.kinetic_energy() + b.mass * config_.gravity * b.position.z();
    return e;
  }

  /// Advances one dt. Throws SimulationDivergence on solver blow-up.
  void step(const std::vector<ExternalForce>& forces = {})
  {
    const double dt = config_.dt;
    for (RigidBody& b : bodies_)
      b.linear_velocity.z() -= config_.gravity * dt;
    for (const ExternalForce& f : forces) {
      RigidBody& b = bodies_.at(f.body);
      b.linear_velocity += dt * b.inv_mass() * f.force;
      b.angular_velocity += dt * b.inv_inertia() * (f.point - b.position).cross(f.force);
    }

    build_constraints();
    warm_start();
    for (int it = 0; it < config_.solver_iterations; ++it)
      solve_velocities();

    for (RigidBody& b : bodies_) {
      b.position += dt * b.linear_velocity;
      const Vec3 w = b.angular_velocity;
      Quat spin(0.0, w.x(), w.y(), w.z());
      Quat dq = spin * b.orientation;
      b.orientation.coeffs() += 0.5 * dt * dq.coeffs();
      b.orientation.normalize();
    }

    for (std::size_t i = 0; i < bodies_.size(); ++i) {
      const RigidBody& b = bodies_[i];
      const double v = b.linear_velocity.norm();
      const double w = b.angular_velocity.norm() * b.half() * std::sqrt(3.0);
      if (!std::isfinite(v) || !std::isfinite(w) || v > config_.max_speed || w > config_.max_speed) {
        std::ostringstream msg;
        msg << "solver divergence: body " << i << " speed " << v << " m/s";
        throw SimulationDivergence(msg.str());
      }
    }
  }

  std::size_t contact_count() const { return constraints_.size(); }

private:
  struct Constraint {
    int a = 0;
    int b = kGround;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    Vec3 t1 = Vec3::UnitX();
    Vec3 t2 = Vec3::UnitY();
    Vec3 ra = Vec3::Zero();
    Vec3 rb = Vec3::Zero();
    double mass_n = 0.0;
    double mass_t1 = 0.0;
    double mass_t2 = 0.0;
    double bias = 0.0;
    double jn = 0.0;
    double jt1 = 0.0;
    double jt2 = 0.0;
  };

  Vec3 relative_velocity(const Constraint& c) const
  {
    Vec3 v = bodies_[static_cast<std::size_t>(c.a)].linear_velocity +
             bodies_[static_cast<std::size_t>(c.a)].angular_velocity.cross(c.ra);
    if (c.b != kGround) {
      const RigidBody& b = bodies_[static_cast<std::size_t>(c.b)];
      v -= b.linear_velocity + b.angular_velocity.cross(c.rb);
    }
    return v;
  }

  void apply(const Constraint& c, const Vec3& impulse)
  {
    RigidBody& a = bodies_[static_cast<std::size_t>(c.a)];
    a.linear_velocity += a.inv_mass() * impulse;
    a.angular_velocity += a.inv_inertia() * c.ra.cross(impulse);
    if (c.b != kGround) {
      RigidBody& b = bodies_[static_cast<std::size_t>(c.b)];
      b.linear_velocity -= b.inv_mass() * impulse;
      b.angular_velocity -= b.inv_inertia() * c.rb.cross(impulse);
    }
  }

  double effective_mass(const Constraint& c, const Vec3& dir) const
  {
    const RigidBody& a = bodies_[static_cast<std::size_t>(c.a)];
    double k = a.inv_mass() + a.inv_inertia() * c.ra.cross(dir).squaredNorm();
    if (c.b != kGround) {
      const RigidBody& b = bodies_[static_cast<std::size_t>(c.b)];
      k += b.inv_mass() + b.inv_inertia() * c.rb.cross(dir).squaredNorm();
    }
    return 1.0 / k;
  }

  // Points are solved in an order that depends only on |x|, y and z, so a
  // scene mirrored in x is solved in the mirrored order. Points mirrored
  // about x = 0 are ordered by the sign of the bodies' summed x, which also
  // flips under the mirror.
  bool solve_before(const Contact& p, const Contact& q) const
  {
    if (p.point.z() != q.point.z())
      return p.point.z() < q.point.z();
    if (p.point.y() != q.point.y())
      return p.point.y() < q.point.y();
    if (std::abs(p.point.x()) != std::abs(q.point.x()))
      return std::abs(p.point.x()) < std::abs(q.point.x());
    return chirality_ * p.point.x() < chirality_ * q.point.x() ||
           (chirality_ == 0.0 && p.point.x() < q.point.x());
  }

  void add_manifold(int a, int b, std::vector<Contact> contacts)
  {
    std::sort(contacts.begin(), contacts.end(),
              [this](const Contact& p, const Contact& q) { return solve_before(p, q); });
    for (const Contact& ct : contacts) {
      Constraint c;
      c.a = a;
      c.b = b;
      c.point = ct.point;
      c.normal = ct.normal;
      tangent_basis(c.normal, c.t1, c.t2);
      c.ra = ct.point - bodies_[static_cast<std::size_t>(a)].position;
      if (b != kGround)
        c.rb = ct.point - bodies_[static_cast<std::size_t>(b)].position;
      c.mass_n = effective_mass(c, c.normal);
      c.mass_t1 = effective_mass(c, c.t1);
      c.mass_t2 = effective_mass(c, c.t2);

      const double vn = relative_velocity(c).dot(c.normal);
      const double position_bias =
          config_.baumgarte_beta / config_.dt * std::max(0.0, ct.penetration - config_.penetration_slop);
      const double bounce = vn < -config_.restitution_threshold ? -config_.restitution * vn : 0.0;
      c.bias = std::max(position_bias, bounce);
      constraints_.push_back(c);
    }
  }

  void build_constraints()
  {
    previous_.swap(constraints_);
    constraints_.clear();
    chirality_ = 0.0;
    for (const RigidBody& b : bodies_)
      chirality_ += b.position.x();
    const int n = static_cast<int>(bodies_.size());
    for (int i = 0; i < n; ++i)
      add_manifold(i, kGround, contact_manifold_ground(bodies_[static_cast<std::size_t>(i)]));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        add_manifold(j, i,
                     contact_manifold(bodies_[static_cast<std::size_t>(j)], bodies_[static_cast<std::size_t>(i)]));
  }

  void warm_start()
  {
    constexpr double match_radius_sq = 0.02 * 0.02;
    for (Constraint& c : constraints_) {
      const Constraint* best = nullptr;
      double best_d = match_radius_sq;
      for (const Constraint& p : previous_) {
        if (p.a != c.a || p.b != c.b || p.normal.dot(c.normal) < 0.99)
          continue;
        const double d = (p.point - c.point).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = &p;
        }
      }
      if (best == nullptr)
        continue;
      c.jn = best->jn;
      // Re-express the old friction impulse in the new tangent basis.
      const Vec3 old_t = best->jt1 * best->t1 + best->jt2 * best->t2;
      c.jt1 = old_t.dot(c.t1);
      c.jt2 = old_t.dot(c.t2);
      apply(c, c.jn * c.normal + c.jt1 * c.t1 + c.jt2 * c.t2);
    }
  }

  void solve_velocities()
  {
    for (Constraint& c : constraints_) {
      const Vec3 v = relative_velocity(c);
      const double limit = config_.friction_mu * c.jn;

      double d1 = -c.mass_t1 * v.dot(c.t1);
      const double jt1 = std::clamp(c.jt1 + d1, -limit, limit);
      d1 = jt1 - c.jt1;
      c.jt1 = jt1;

      double d2 = -c.mass_t2 * v.dot(c.t2);
      const double jt2 = std::clamp(c.jt2 + d2, -limit, limit);
      d2 = jt2 - c.jt2;
      c.jt2 = jt2;
      apply(c, d1 * c.t1 + d2 * c.t2);

      const double vn = relative_velocity(c).dot(c.normal);
      double dn = c.mass_n * (-vn + c.bias);
      const double jn = std::max(0.0, c.jn + dn);
      dn = jn - c.jn;
      c.jn = jn;
      apply(c, dn * c.normal);
    }
  }

  std::vector<RigidBody> bodies_;
  SimConfig config_;
  std::vector<Constraint> constraints_;
  std::vector<Constraint> previous_;
  double chirality_ = 0.0;
};

}  // namespace ipe::dynamics
