#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "rlihf/env.hpp"
#include "rlihf/errors.hpp"

using namespace rlihf;

namespace {

// Homogeneous-transform chain built from Eigen's AngleAxis; independent of
// the closed forms used by forward_kinematics.
std::vector<Point> fk_oracle(const Eigen::VectorXd& q, const ArmConfig& arm) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  std::vector<Point> pts{Point::Zero()};
  for (int i = 0; i < arm.num_links(); ++i) {
    const Eigen::Vector3d axis = (!arm.spatial || i % 2 == 0) ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
    t.rotate(Eigen::AngleAxisd(q[i], axis));
    t.translate(Eigen::Vector3d(arm.link_lengths[i], 0, 0));
    pts.push_back(t.translation());
  }
  return pts;
}

Eigen::VectorXd random_angles(int k, Rng& rng) {
  Eigen::VectorXd q(k);
  for (int i = 0; i < k; ++i) q[i] = (2.0 * uniform01(rng) - 1.0) * 3.0;
  return q;
}

double sampled_distance(const Point& a, const Point& b, const Point& p, int samples) {
  double best = 1e300;
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    best = std::min(best, (a + t * (b - a) - p).norm());
  }
  return best;
}

SceneSpec open_scene() {
  SceneSpec s;
  s.arm.link_lengths = {0.5, 0.4};
  s.arm.joint_limits = {{-3.0, 3.0}, {-2.0, 2.0}};
  s.arm.max_joint_velocity = 0.1;
  s.home_pose = {0.0, 0.0};
  s.object_position = Point(0.0, 0.9, 0.0);
  s.goal_center = Point(-0.9, 0.0, 0.0);
  s.goal_radius = 0.1;
  s.horizon = 20;
  return s;
}

}  // namespace

TEST_CASE("forward kinematics matches a transform-chain oracle") {
  Rng rng(7);
  for (bool spatial : {false, true}) {
    ArmConfig arm = spatial ? spatial_scene().arm : default_scene().arm;
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd q = random_angles(arm.num_links(), rng);
      const auto got = forward_kinematics(q, arm);
      const auto want = fk_oracle(q, arm);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK((got[i] - want[i]).norm() < 1e-12);
    }
  }
}

TEST_CASE("forward kinematics of a straight planar arm") {
  ArmConfig arm = default_scene().arm;
  const auto pts = forward_kinematics(Eigen::VectorXd::Zero(3), arm);
  CHECK(pts.back().x() == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(pts.back().y() == 0.0);
  CHECK_THROWS_AS(forward_kinematics(Eigen::VectorXd::Zero(2), arm), InputError);
}

TEST_CASE("segment distance and collision agree with dense sampling") {
  Rng rng(11);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Point a(uniform01(rng), uniform01(rng), 0), b(uniform01(rng), uniform01(rng), 0), p(uniform01(rng), uniform01(rng), 0);
    const double exact = segment_point_distance(a, b, p);
    const double sampled = sampled_distance(a, b, p, 20000);
    CHECK(exact <= sampled + 1e-12);
    CHECK(sampled - exact < 1e-4);

    const Eigen::VectorXd q = random_angles(3, rng);
    const auto pts = forward_kinematics(q, default_scene().arm);
    const Obstacle ob{Point(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0, 0), 0.05 + 0.2 * uniform01(rng)};
    double min_d = 1e300;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) min_d = std::min(min_d, sampled_distance(pts[i], pts[i + 1], ob.center, 4000));
    if (std::abs(min_d - ob.radius) < 1e-3) continue;  // too close to call by sampling
    CHECK(collision_check(pts, {ob}) == (min_d < ob.radius));
    ++checked;
  }
  CHECK(checked > 250);
}

TEST_CASE("collision boundary is strict") {
  const std::vector<Point> pts{Point(0, 0, 0), Point(1, 0, 0)};
  CHECK_FALSE(collision_check(pts, {Obstacle{Point(0.5, 0.25, 0), 0.25}}));
  CHECK(collision_check(pts, {Obstacle{Point(0.5, 0.25, 0), 0.2500001}}));
}

TEST_CASE("step integrates clamped commands within joint limits") {
  SceneSpec s = open_scene();
  s.home_pose = {2.95, 0.0};
  Environment env(s);
  WorldState w = env.reset(0);
  Eigen::VectorXd a(2);
  a << 5.0, -0.5;
  auto [next, out] = env.step(w, Action{a});
  CHECK(next.joint_angles[0] == 3.0);  // 2.95 + 0.1 clamped to the limit
  CHECK(next.joint_angles[1] == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(next.step_index == 1);
  CHECK_FALSE(out.terminated);
  a << std::nan(""), 0.0;
  CHECK_THROWS_AS(env.step(w, Action{a}), InputError);
  CHECK_THROWS_AS(env.step(w, Action{Eigen::VectorXd::Zero(3)}), InputError);
}

TEST_CASE("horizon terminates and stepping afterwards is a usage error") {
  Environment env(open_scene());
  WorldState w = env.reset(0);
  StepOutcome out;
  for (int t = 0; t < 20; ++t) {
    CHECK_FALSE(w.terminated);
    std::tie(w, out) = env.step(w, Action{Eigen::VectorXd::Zero(2)});
  }
  CHECK(out.terminated);
  CHECK_FALSE(out.success);
  CHECK_THROWS_AS(env.step(w, Action{Eigen::VectorXd::Zero(2)}), UsageError);
}

TEST_CASE("grasp then carry into the goal succeeds and terminates") {
  SceneSpec s = open_scene();
  s.object_position = Point(0.9 * std::cos(0.1), 0.9 * std::sin(0.1), 0.0);  // end effector after one step
  s.goal_center = Point(0.6364, 0.6364, 0.0);  // the end effector after rotating the base by pi/4
  s.goal_radius = 0.05;
  s.horizon = 100;
  Environment env(s);
  WorldState w = env.reset(0);
  Eigen::VectorXd a(2);
  a << 1.0, 0.0;
  auto [w1, o1] = env.step(w, Action{a});
  CHECK(o1.grasped);
  CHECK(w1.carrying);
  CHECK(w1.object_position == o1.end_effector);
  bool done = false;
  int steps = 1;
  WorldState cur = w1;
  while (!done) {
    auto [n, o] = env.step(cur, Action{a});
    ++steps;
    CHECK(o.r_env == (o.success ? 1.0 : 0.0));
    done = o.terminated;
    if (done) CHECK(o.success);
    cur = n;
  }
  CHECK(steps < 10);
}

TEST_CASE("r_env invariant and distance continuity over random rollouts") {
  Environment env(default_scene());
  Rng rng(3);
  const double speed = env.max_end_effector_speed();
  const double grasp = env.scene().grasp_radius;
  int collisions = 0;
  for (int ep = 0; ep < 30; ++ep) {
    WorldState w = env.reset(rng());
    double d = env.distance_to_subgoal(w);
    while (!w.terminated) {
      Eigen::VectorXd a(3);
      for (int i = 0; i < 3; ++i) a[i] = 2.0 * uniform01(rng) - 1.0;
      auto [n, o] = env.step(w, Action{a});
      CHECK(o.r_env == (o.success ? 1.0 : 0.0) + (o.collided ? -0.1 : 0.0));
      if (o.success) CHECK(o.terminated);
      CHECK(o.distance_to_subgoal >= 0.0);
      const double bound = o.grasped ? speed + 2.0 * grasp : speed;
      CHECK(std::abs(o.distance_to_subgoal - d) <= bound + 1e-12);
      if (o.grasped) CHECK(o.distance_to_subgoal <= d + 1e-12);  // grasping never increases the distance
      collisions += o.collided;
      d = o.distance_to_subgoal;
      w = n;
    }
  }
  CHECK(collisions > 0);  // the rollouts did exercise the collision branch
}

TEST_CASE("collisions are penalized without terminating") {
  SceneSpec s = open_scene();
  s.obstacles = {Obstacle{Point(0.9, 0.15, 0.0), 0.1}};
  Environment env(s);
  WorldState w = env.reset(0);
  Eigen::VectorXd a(2);
  a << 1.0, 0.0;
  bool hit = false;
  for (int t = 0; t < 5 && !hit; ++t) {
    auto [n, o] = env.step(w, Action{a});
    if (o.collided) {
      hit = true;
      CHECK(o.r_env == doctest::Approx(-0.1));
      CHECK_FALSE(o.terminated);
    }
    w = n;
  }
  CHECK(hit);
}

TEST_CASE("reset is deterministic and jitter stays in its box") {
  Environment env(default_scene());
  const SceneSpec& s = env.scene();
  CHECK(env.reset(42) == env.reset(42));
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const WorldState w = env.reset(seed);
    const Point off = w.object_position - s.object_position;
    CHECK(std::abs(off.x()) <= s.object_jitter);
    CHECK(std::abs(off.y()) <= s.object_jitter);
    CHECK(off.z() == 0.0);
    moved |= off.norm() > 0.0;
  }
  CHECK(moved);
}

TEST_CASE("observation layout") {
  Environment env(default_scene());
  const WorldState w = env.reset(1);
  const Eigen::VectorXd obs = env.observe(w);
  REQUIRE(obs.size() == 10);
  CHECK(env.observation_dim() == 10);
  CHECK(obs.head(3) == w.joint_angles);
  CHECK(obs.segment(3, 2) == env.end_effector(w).head(2));
  CHECK(obs.segment(5, 2) == w.object_position.head(2));
  CHECK(obs.segment(7, 2) == w.goal_center.head(2));
  CHECK(obs[9] == 0.0);
  Environment spatial(spatial_scene());
  CHECK(spatial.observation_dim() == 7 + 9 + 1);
}

TEST_CASE("scene validation rejects inconsistent geometry") {
  SceneSpec s = open_scene();
  s.obstacles = {Obstacle{s.goal_center, 0.05}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = open_scene();
  s.obstacles = {Obstacle{Point(0.3, 0.0, 0.0), 0.05}};
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("home pose"), ConfigError);
  s = open_scene();
  s.home_pose = {0.0, 2.5};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = open_scene();
  s.arm.link_lengths = {0.5};
  s.arm.joint_limits = {{-1, 1}};
  s.home_pose = {0.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(default_scene().validate());
  CHECK_NOTHROW(spatial_scene().validate());
}
