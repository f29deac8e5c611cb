#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ipe/dynamics/simulate.hpp"

using namespace ipe;
using namespace ipe::dynamics;

namespace {

RigidBody cube_at(const Vec3& p, double mass = 500.0)
{
  RigidBody b;
  b.position = p;
  b.mass = mass;
  return b;
}

SceneState stack_x(const std::vector<double>& xs)
{
  std::vector<Vec2> xy;
  for (double x : xs)
    xy.emplace_back(x, 0.0);
  return stack_from_horizontal(xy);
}

std::vector<RigidBody> bodies_of(const SceneState& s)
{
  std::vector<RigidBody> out;
  for (const Block& b : s.blocks)
    out.push_back(RigidBody::from_block(b));
  return out;
}

bool contains_point(const std::vector<Contact>& cs, const Vec3& p, double tol)
{
  return std::any_of(cs.begin(), cs.end(), [&](const Contact& c) { return (c.point - p).norm() < tol; });
}

}  // namespace

TEST(RigidBody, CubeInertia)
{
  const RigidBody b = RigidBody::from_block(Block{});
  EXPECT_DOUBLE_EQ(b.mass, 500.0);
  EXPECT_DOUBLE_EQ(b.inertia(), 500.0 / 6.0);
}

TEST(ContactManifold, CubeRestingOnGround)
{
  const auto cs = contact_manifold_ground(cube_at(Vec3(0, 0, 0.5)));
  ASSERT_EQ(cs.size(), 4u);
  for (const Contact& c : cs) {
    EXPECT_EQ(c.normal, Vec3::UnitZ());
    EXPECT_DOUBLE_EQ(c.penetration, 0.0);
    EXPECT_NEAR(std::abs(c.point.x()), 0.5, 1e-12);
    EXPECT_NEAR(std::abs(c.point.y()), 0.5, 1e-12);
  }
}

TEST(ContactManifold, SeparatedCubesAreEmpty)
{
  EXPECT_TRUE(contact_manifold(cube_at(Vec3(0, 0, 0.5)), cube_at(Vec3(2.0, 0, 0.5))).empty());
  EXPECT_TRUE(contact_manifold(cube_at(Vec3(0, 0, 2.5)), cube_at(Vec3(0, 0, 0.5))).empty());
  EXPECT_TRUE(contact_manifold_ground(cube_at(Vec3(0, 0, 1.5))).empty());
}

TEST(ContactManifold, OffsetStackSpansOverlapRectangle)
{
  const RigidBody top = cube_at(Vec3(0.3, 0, 1.5));
  const RigidBody bottom = cube_at(Vec3(0, 0, 0.5));
  const auto cs = contact_manifold(top, bottom);
  ASSERT_EQ(cs.size(), 4u);
  // Overlap of [-0.5, 0.5] and [-0.2, 0.8] in x, full width in y, at z = 1.
  for (double x : {-0.2, 0.5})
    for (double y : {-0.5, 0.5})
      EXPECT_TRUE(contains_point(cs, Vec3(x, y, 1.0), 1e-9)) << x << "," << y;
  for (const Contact& c : cs) {
    EXPECT_NEAR((c.normal - Vec3::UnitZ()).norm(), 0.0, 1e-12);
    EXPECT_GE(c.penetration, 0.0);
  }
}

TEST(ContactManifold, NormalsPointFromBToA)
{
  const auto cs = contact_manifold(cube_at(Vec3(0, 0, 0.5)), cube_at(Vec3(0.1, 0.2, 1.49)));
  ASSERT_FALSE(cs.empty());
  for (const Contact& c : cs) {
    EXPECT_NEAR(c.normal.norm(), 1.0, 1e-12);
    EXPECT_LT(c.normal.z(), -0.99);
    EXPECT_NEAR(c.penetration, 0.01, 1e-9);
  }
}

TEST(ContactManifold, RandomPosesRespectContract)
{
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    RigidBody a = cube_at(Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2)));
    RigidBody b = cube_at(Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2)));
    b.orientation = Quat(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng))
                        .normalized();
    a.orientation = Quat(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng))
                        .normalized();
    const auto cs = contact_manifold(a, b);
    EXPECT_LE(cs.size(), 8u);
    for (const Contact& c : cs) {
      EXPECT_NEAR(c.normal.norm(), 1.0, 1e-9);
      EXPECT_GE(c.penetration, 0.0);
      // The normal separates the bodies: A lies on its positive side.
      EXPECT_GT(c.normal.dot(a.position - b.position), -1e-9);
    }
    const auto gs = contact_manifold_ground(a);
    EXPECT_LE(gs.size(), 8u);
  }
}

TEST(ContactManifold, MirroredPairGivesMirroredSet)
{
  RigidBody a = cube_at(Vec3(0.23, -0.11, 1.48));
  RigidBody b = cube_at(Vec3(0.05, 0.02, 0.5));
  a.orientation = Quat(Eigen::AngleAxisd(0.2, Vec3(0.3, 0.1, 1.0).normalized()));
  auto mirror = [](RigidBody r) {
    r.position.x() = -r.position.x();
    r.orientation = Quat(r.orientation.w(), r.orientation.x(), -r.orientation.y(), -r.orientation.z());
    return r;
  };
  const auto cs = contact_manifold(a, b);
  const auto ms = contact_manifold(mirror(a), mirror(b));
  ASSERT_EQ(cs.size(), ms.size());
  ASSERT_FALSE(cs.empty());
  for (const Contact& c : cs)
    EXPECT_TRUE(contains_point(ms, Vec3(-c.point.x(), c.point.y(), c.point.z()), 1e-12));
}

TEST(SimConfig, DurationMustBeMultipleOfDt)
{
  SimConfig c;
  EXPECT_EQ(c.step_count(), 200);
  c.duration = 0.015;
  EXPECT_THROW(c.step_count(), std::invalid_argument);
}

TEST(World, BallisticStep)
{
  SimConfig cfg;
  RigidBody b = cube_at(Vec3(0, 0, 5));
  b.linear_velocity = Vec3(1.0, 0.0, 0.0);
  World w({b}, cfg);
  w.step();
  const RigidBody& r = w.bodies()[0];
  EXPECT_NEAR(r.linear_velocity.z(), -9.81 * 0.01, 1e-12);
  EXPECT_NEAR(r.position.z(), 5.0 - 9.81 * 0.01 * 0.01, 1e-12);
  EXPECT_NEAR(r.position.x(), 0.01, 1e-12);
  EXPECT_EQ(w.contact_count(), 0u);
}

TEST(World, QuaternionStaysNormalized)
{
  SimConfig cfg;
  RigidBody b = cube_at(Vec3(0, 0, 5));
  b.angular_velocity = Vec3(3.0, -2.0, 5.0);
  World w({b}, cfg);
  for (int i = 0; i < 100; ++i) {
    w.step();
    EXPECT_NEAR(w.bodies()[0].orientation.norm(), 1.0, 1e-9);
  }
}

TEST(World, AlignedFourStackRests)
{
  SimConfig cfg;
  cfg.rest_exit = false;
  World w(bodies_of(stack_x({0, 0, 0, 0})), cfg);
  for (int i = 0; i < 200; ++i)
    w.step();
  EXPECT_LT(std::abs(3.5 - w.bodies().back().position.z()), 0.01);
}

TEST(World, RestitutionRebound)
{
  // Drop from 1 m: impact speed sqrt(2 g h).
  SimConfig cfg;
  World w({cube_at(Vec3(0, 0, 1.5))}, cfg);
  const double impact = std::sqrt(2.0 * 9.81 * 1.0);
  double rebound = 0.0;
  for (int i = 0; i < 100; ++i) {
    w.step();
    if (w.bodies()[0].linear_velocity.z() > 0.0) {
      rebound = w.bodies()[0].linear_velocity.z();
      break;
    }
  }
  EXPECT_NEAR(rebound / impact, 0.2, 0.2 * 0.15);
}

TEST(World, EnergyNeverJumpsWithoutPerturbation)
{
  SimConfig cfg;
  cfg.rest_exit = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    World w(bodies_of(generate_scene(GenParams(4, 0.29, seed))), cfg);
    double e = w.total_energy();
    for (int i = 0; i < 200; ++i) {
      w.step();
      const double e2 = w.total_energy();
      EXPECT_LE(e2 - e, 0.01 * std::abs(e)) << "seed " << seed << " step " << i;
      e = e2;
    }
  }
}

TEST(World, DivergenceGuard)
{
  SimConfig cfg;
  RigidBody b = cube_at(Vec3(0, 0, 50));
  b.linear_velocity = Vec3(150.0, 0.0, 0.0);
  World w({b}, cfg);
  EXPECT_THROW(w.step(), SimulationDivergence);
}

TEST(Perturbation, ScheduleShape)
{
  const PerturbationSchedule s = PerturbationSchedule::sample(40.0, 1);
  EXPECT_EQ(s.direction_angles.size(), 50u);
  for (double a : s.direction_angles) {
    EXPECT_GE(a, 0.0);
    EXPECT_LT(a, 2.0 * std::numbers::pi);
  }
  for (double t = 0.0; t < 1.0; t += 0.0037) {
    const Vec3 f = s.force_at(t);
    EXPECT_EQ(f.z(), 0.0);
    EXPECT_NEAR(f.norm(), 40.0, 1e-9);
  }
  EXPECT_EQ(s.force_at(1.0), Vec3::Zero());
  EXPECT_EQ(PerturbationSchedule::sample(0.0, 1).force_at(0.5), Vec3::Zero());
  // Piecewise constant over each 20 ms slot.
  EXPECT_EQ(s.force_at(0.021), s.force_at(0.039));
  const Vec3 m = s.mirrored_x().force_at(0.3);
  EXPECT_EQ(m, Vec3(-s.force_at(0.3).x(), s.force_at(0.3).y(), 0.0));
  EXPECT_THROW(PerturbationSchedule::sample(-1.0, 1), std::invalid_argument);
}

TEST(SimulateScene, AlignedStackStands)
{
  const SimOutcome o = simulate_scene(stack_x({0, 0, 0, 0}), SimConfig{}, 0.0, 0.0, 1);
  EXPECT_FALSE(o.fell);
  EXPECT_LT(std::abs(o.top_block_z_drop), 0.01);
  for (double d : o.per_block_displacement)
    EXPECT_GE(d, 0.0);
}

TEST(SimulateScene, OverhangingTwoStackFalls)
{
  EXPECT_FALSE(analytic_stability(stack_x({0, 0.8})).stable);
  EXPECT_TRUE(simulate_scene(stack_x({0, 0.8}), SimConfig{}, 0.0, 0.0, 1).fell);
}

TEST(SimulateScene, FellMatchesDropCriterion)
{
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SimOutcome o = simulate_scene(generate_scene(GenParams(4, 0.29, seed)), SimConfig{}, 40.0, 0.1, seed);
    EXPECT_EQ(o.fell, std::abs(o.top_block_z_drop) > 0.2);
    EXPECT_EQ(o.per_block_displacement.size(), 4u);
    EXPECT_LE(o.steps_executed, 200);
  }
}

TEST(SimulateScene, Deterministic)
{
  const SceneState s = generate_scene(GenParams(4, 0.29, 17));
  EXPECT_EQ(simulate_scene(s, SimConfig{}, 40.0, 0.1, 5), simulate_scene(s, SimConfig{}, 40.0, 0.1, 5));
  EXPECT_THROW(simulate_scene(s, SimConfig{}, 40.0, -0.1, 5), std::invalid_argument);
}

TEST(SimulateScene, RestExitDoesNotChangeOutcome)
{
  SimConfig full;
  full.rest_exit = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SceneState s = generate_scene(GenParams(4, 0.29, seed));
    const SimOutcome fast = simulate_scene(s, SimConfig{}, 0.0, 0.0, seed);
    const SimOutcome slow = simulate_scene(s, full, 0.0, 0.0, seed);
    EXPECT_EQ(fast.fell, slow.fell) << seed;
    EXPECT_NEAR(fast.top_block_z_drop, slow.top_block_z_drop, 0.01) << seed;
  }
}

TEST(SimulateScene, OracleAgreementOnSample)
{
  int agree = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const SceneState s = generate_scene(GenParams(4, 0.29, derive_seed(21, 0, i)));
    agree += simulate_scene(s, SimConfig{}, 0.0, 0.0, i).fell != analytic_stability(s).stable ? 1 : 0;
  }
  EXPECT_GE(agree, static_cast<int>(0.95 * n));
}

TEST(Symmetry, MirroredSceneAndPushGiveMirroredTrajectory)
{
  SimConfig cfg;
  cfg.rest_exit = false;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const SceneState s = generate_scene(GenParams(4, 0.29, seed));
    Rng rng = make_rng(seed);
    const std::vector<RigidBody> bodies = noisy_bodies(s, seed % 2 == 0 ? 0.0 : 0.1, rng);
    std::vector<RigidBody> mirrored = bodies;
    for (RigidBody& b : mirrored)
      b.position.x() = -b.position.x();
    const PerturbationSchedule push = PerturbationSchedule::sample(40.0, seed + 100);

    std::vector<Vec3> end_a;
    std::vector<Vec3> end_b;
    auto grab = [](std::vector<Vec3>& out) {
      return [&out](int step, double, const std::vector<RigidBody>& bs) {
        if (step == 199)
          for (const RigidBody& b : bs)
            out.push_back(b.position);
      };
    };
    run_bodies(bodies, cfg, push, grab(end_a));
    run_bodies(mirrored, cfg, push.mirrored_x(), grab(end_b));
    ASSERT_EQ(end_a.size(), end_b.size());
    for (std::size_t i = 0; i < end_a.size(); ++i) {
      EXPECT_NEAR(end_a[i].x(), -end_b[i].x(), 1e-6) << "seed " << seed;
      EXPECT_NEAR(end_a[i].y(), end_b[i].y(), 1e-6) << "seed " << seed;
      EXPECT_NEAR(end_a[i].z(), end_b[i].z(), 1e-6) << "seed " << seed;
    }
  }
}

TEST(Fragility, TwoStackFallRateNonDecreasingInOffset)
{
  double previous = -1.0;
  for (int k = 0; k <= 6; ++k) {
    const SceneState s = stack_x({0.0, 0.1 * k});
    int fell = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      fell += simulate_scene(s, SimConfig{}, 0.0, 0.1, derive_seed(77, seed)).fell ? 1 : 0;
    const double p = fell / 100.0;
    EXPECT_GE(p, previous) << "offset " << 0.1 * k;
    previous = p;
  }
}
