#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rlihf/rng.hpp"

namespace rlihf {

using Point = Eigen::Vector3d;

struct JointLimit {
  double low = -3.141592653589793;
  double high = 3.141592653589793;
};

/// Serial-link arm. Planar arms rotate every joint about z; spatial arms
/// alternate z and y joint axes starting at the base. Links extend along
/// the local x axis.
struct ArmConfig {
  std::vector<double> link_lengths;
  std::vector<JointLimit> joint_limits;
  double max_joint_velocity = 0.05;  // radians per step at |command| = 1
  bool spatial = false;

  int num_links() const { return static_cast<int>(link_lengths.size()); }
  int workspace_dim() const { return spatial ? 3 : 2; }
  void validate() const;
};

struct Obstacle {
  Point center = Point::Zero();
  double radius = 0.1;
};

enum class ObjectPlacement { fixed, uniform };

struct SceneSpec {
  ArmConfig arm;
  std::vector<double> home_pose;
  std::vector<Obstacle> obstacles;
  Point object_position = Point::Zero();
  ObjectPlacement object_placement = ObjectPlacement::fixed;
  double object_jitter = 0.0;  // half-width of the uniform placement box
  Point goal_center = Point::Zero();
  double goal_radius = 0.1;
  double grasp_radius = 0.05;
  int horizon = 300;
  double success_bonus = 1.0;
  double collision_penalty = -0.1;

  /// Throws ConfigError for inconsistent geometry (obstacle over the goal,
  /// the object or the home-pose links; home pose outside limits).
  void validate() const;
};

/// Planar 3-link obstacle scene used as the desk-scale default.
SceneSpec default_scene();
/// 7-link spatial variant of the default scene.
SceneSpec spatial_scene();

struct WorldState {
  Eigen::VectorXd joint_angles;
  Point object_position = Point::Zero();
  Point goal_center = Point::Zero();
  double goal_radius = 0.0;
  std::vector<Obstacle> obstacles;
  bool carrying = false;
  bool terminated = false;
  int step_index = 0;

  bool operator==(const WorldState& other) const;
};

struct Action {
  Eigen::VectorXd joint_velocity_commands;
};

struct StepOutcome {
  Eigen::VectorXd observation;
  double r_env = 0.0;
  bool terminated = false;
  bool success = false;
  bool collided = false;
  bool grasped = false;  // carrying switched on during this step
  double distance_to_subgoal = 0.0;
  Point end_effector = Point::Zero();
};

/// Joint positions from base (origin) to end effector, K+1 points.
std::vector<Point> forward_kinematics(const Eigen::VectorXd& joint_angles, const ArmConfig& config);

/// True iff some link segment comes strictly closer than an obstacle's
/// radius to its center.
bool collision_check(const std::vector<Point>& joint_points, const std::vector<Obstacle>& obstacles);

double segment_point_distance(const Point& a, const Point& b, const Point& p);

class Environment {
 public:
  explicit Environment(SceneSpec scene);

  const SceneSpec& scene() const { return scene_; }
  int action_dim() const { return scene_.arm.num_links(); }
  int observation_dim() const;

  WorldState reset(std::uint64_t seed) const;
  std::pair<WorldState, StepOutcome> step(const WorldState& state, const Action& action) const;

  Eigen::VectorXd observe(const WorldState& state) const;
  Point end_effector(const WorldState& state) const;

  /// Remaining task distance: |ee - object| + |object - goal| while
  /// reaching, |ee - goal| while carrying. Lipschitz in the end effector
  /// within a phase and never increases across the grasp switch.
  double distance_to_subgoal(const WorldState& state) const;

  /// Upper bound on end-effector displacement in one step.
  double max_end_effector_speed() const;

 private:
  SceneSpec scene_;
};

}  // namespace rlihf
