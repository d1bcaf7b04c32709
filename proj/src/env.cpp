#include "rlihf/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rlihf/errors.hpp"

namespace rlihf {

namespace {

// Rotation of a frame about its own z (axis 0) or y (axis 1).
Eigen::Matrix3d joint_rotation(int axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  if (axis == 0) {
    r << c, -s, 0, s, c, 0, 0, 0, 1;
  } else {
    r << c, 0, s, 0, 1, 0, -s, 0, c;
  }
  return r;
}

Point project(const Point& p, int dim) {
  Point q = p;
  if (dim == 2) q.z() = 0.0;
  return q;
}

}  // namespace

void ArmConfig::validate() const {
  if (link_lengths.size() < 2) throw ConfigError("arm.link_lengths: need at least 2 links");
  if (link_lengths.size() > 7) throw ConfigError("arm.link_lengths: at most 7 links supported");
  for (std::size_t i = 0; i < link_lengths.size(); ++i) {
    if (!(link_lengths[i] > 0.0) || !std::isfinite(link_lengths[i])) {
      throw ConfigError("arm.link_lengths[" + std::to_string(i) + "]: must be a positive length");
    }
  }
  if (joint_limits.size() != link_lengths.size()) {
    throw ConfigError("arm.joint_limits: expected one interval per link");
  }
  for (std::size_t i = 0; i < joint_limits.size(); ++i) {
    if (!(joint_limits[i].low < joint_limits[i].high)) {
      throw ConfigError("arm.joint_limits[" + std::to_string(i) + "]: low must be < high");
    }
  }
  if (!(max_joint_velocity > 0.0) || !std::isfinite(max_joint_velocity)) {
    throw ConfigError("arm.max_joint_velocity: must be positive");
  }
}

void SceneSpec::validate() const {
  arm.validate();
  const int k = arm.num_links();
  if (static_cast<int>(home_pose.size()) != k) {
    throw ConfigError("scene.home_pose: expected " + std::to_string(k) + " angles");
  }
  for (int i = 0; i < k; ++i) {
    if (home_pose[i] < arm.joint_limits[i].low || home_pose[i] > arm.joint_limits[i].high) {
      throw ConfigError("scene.home_pose[" + std::to_string(i) + "]: outside joint limits");
    }
  }
  if (!(goal_radius > 0.0)) throw ConfigError("scene.goal_radius: must be positive");
  if (!(grasp_radius > 0.0)) throw ConfigError("scene.grasp_radius: must be positive");
  if (horizon < 1) throw ConfigError("scene.horizon: must be >= 1");
  if (object_jitter < 0.0) throw ConfigError("scene.object_jitter: must be >= 0");
  if (!std::isfinite(success_bonus) || !std::isfinite(collision_penalty)) {
    throw ConfigError("scene reward constants must be finite");
  }

  Eigen::VectorXd home = Eigen::Map<const Eigen::VectorXd>(home_pose.data(), k);
  const auto points = forward_kinematics(home, arm);
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& ob = obstacles[i];
    const std::string where = "scene.obstacles[" + std::to_string(i) + "]";
    if (!(ob.radius > 0.0)) throw ConfigError(where + ".radius: must be positive");
    if ((ob.center - goal_center).norm() < ob.radius + goal_radius) {
      throw ConfigError(where + ": overlaps the goal region");
    }
    if ((ob.center - object_position).norm() < ob.radius + object_jitter * std::sqrt(3.0)) {
      throw ConfigError(where + ": covers the object placement region");
    }
    if (collision_check(points, {ob})) throw ConfigError(where + ": covers the home pose");
  }
}

SceneSpec default_scene() {
  SceneSpec s;
  s.arm.link_lengths = {0.5, 0.4, 0.3};
  s.arm.joint_limits = {{-3.141592653589793, 3.141592653589793}, {-2.6, 2.6}, {-2.6, 2.6}};
  s.arm.max_joint_velocity = 0.05;
  s.home_pose = {1.5707963267948966, -1.5707963267948966, 0.0};
  s.object_position = Point(0.75, 0.32, 0.0);
  s.object_placement = ObjectPlacement::uniform;
  s.object_jitter = 0.05;
  s.goal_center = Point(0.15, 0.9, 0.0);
  s.goal_radius = 0.08;
  s.obstacles = {Obstacle{Point(0.62, 0.85, 0.0), 0.08}};
  return s;
}

SceneSpec spatial_scene() {
  SceneSpec s;
  s.arm.spatial = true;
  s.arm.link_lengths = {0.3, 0.25, 0.2, 0.2, 0.15, 0.1, 0.1};
  s.arm.joint_limits.assign(7, JointLimit{-2.6, 2.6});
  s.arm.max_joint_velocity = 0.04;
  s.home_pose = {0.0, -0.8, 0.0, 1.2, 0.0, 0.6, 0.0};
  const auto home_points = forward_kinematics(
      Eigen::Map<const Eigen::VectorXd>(s.home_pose.data(), 7), s.arm);
  s.object_position = home_points.back() + Point(0.0, 0.15, -0.1);
  s.object_placement = ObjectPlacement::uniform;
  s.object_jitter = 0.03;
  s.goal_center = home_points.back() + Point(-0.2, 0.45, 0.1);
  s.goal_radius = 0.12;
  s.obstacles = {Obstacle{home_points.back() + Point(-0.1, 0.35, 0.35), 0.08}};
  return s;
}

bool WorldState::operator==(const WorldState& other) const {
  if (obstacles.size() != other.obstacles.size()) return false;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (obstacles[i].center != other.obstacles[i].center ||
        obstacles[i].radius != other.obstacles[i].radius) {
      return false;
    }
  }
  return joint_angles.size() == other.joint_angles.size() && joint_angles == other.joint_angles &&
         object_position == other.object_position && goal_center == other.goal_center &&
         goal_radius == other.goal_radius && carrying == other.carrying &&
         terminated == other.terminated && step_index == other.step_index;
}

std::vector<Point> forward_kinematics(const Eigen::VectorXd& joint_angles, const ArmConfig& config) {
  const int k = config.num_links();
  if (joint_angles.size() != k) {
    throw InputError("forward_kinematics: expected " + std::to_string(k) + " joint angles");
  }
  for (int i = 0; i < k; ++i) {
    if (!std::isfinite(joint_angles[i])) {
      throw InputError("forward_kinematics: joint angle " + std::to_string(i) + " is not finite");
    }
  }
  std::vector<Point> points;
  points.reserve(k + 1);
  points.push_back(Point::Zero());
  if (!config.spatial) {
    double heading = 0.0;
    for (int i = 0; i < k; ++i) {
      heading += joint_angles[i];
      const double len = config.link_lengths[i];
      points.push_back(points.back() + Point(len * std::cos(heading), len * std::sin(heading), 0.0));
    }
    return points;
  }
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();
  for (int i = 0; i < k; ++i) {
    frame = frame * joint_rotation(i % 2, joint_angles[i]);
    points.push_back(points.back() + config.link_lengths[i] * frame.col(0));
  }
  return points;
}

double segment_point_distance(const Point& a, const Point& b, const Point& p) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool collision_check(const std::vector<Point>& joint_points, const std::vector<Obstacle>& obstacles) {
  for (std::size_t i = 0; i + 1 < joint_points.size(); ++i) {
    for (const auto& ob : obstacles) {
      if (segment_point_distance(joint_points[i], joint_points[i + 1], ob.center) < ob.radius) {
        return true;
      }
    }
  }
  return false;
}

Environment::Environment(SceneSpec scene) : scene_(std::move(scene)) { scene_.validate(); }

int Environment::observation_dim() const {
  return scene_.arm.num_links() + 3 * scene_.arm.workspace_dim() + 1;
}

WorldState Environment::reset(std::uint64_t seed) const {
  const int k = scene_.arm.num_links();
  const int dim = scene_.arm.workspace_dim();
  WorldState s;
  s.joint_angles = Eigen::Map<const Eigen::VectorXd>(scene_.home_pose.data(), k);
  s.goal_center = scene_.goal_center;
  s.goal_radius = scene_.goal_radius;
  s.obstacles = scene_.obstacles;
  s.object_position = scene_.object_position;
  if (scene_.object_placement == ObjectPlacement::uniform && scene_.object_jitter > 0.0) {
    Rng rng(derive_seed(seed, "object-placement"));
    Point offset = Point::Zero();
    for (int d = 0; d < dim; ++d) offset[d] = (2.0 * uniform01(rng) - 1.0) * scene_.object_jitter;
    s.object_position = project(scene_.object_position + offset, dim);
  }
  return s;
}

Point Environment::end_effector(const WorldState& state) const {
  return forward_kinematics(state.joint_angles, scene_.arm).back();
}

double Environment::distance_to_subgoal(const WorldState& state) const {
  const Point ee = end_effector(state);
  if (state.carrying) return (ee - state.goal_center).norm();
  return (ee - state.object_position).norm() + (state.object_position - state.goal_center).norm();
}

double Environment::max_end_effector_speed() const {
  double reach = 0.0;
  double bound = 0.0;
  for (int i = scene_.arm.num_links() - 1; i >= 0; --i) {
    reach += scene_.arm.link_lengths[i];
    bound += reach;
  }
  return bound * scene_.arm.max_joint_velocity;
}

Eigen::VectorXd Environment::observe(const WorldState& state) const {
  const int k = scene_.arm.num_links();
  const int dim = scene_.arm.workspace_dim();
  Eigen::VectorXd obs(observation_dim());
  obs.head(k) = state.joint_angles;
  const Point ee = end_effector(state);
  obs.segment(k, dim) = ee.head(dim);
  obs.segment(k + dim, dim) = state.object_position.head(dim);
  obs.segment(k + 2 * dim, dim) = state.goal_center.head(dim);
  obs[k + 3 * dim] = state.carrying ? 1.0 : 0.0;
  return obs;
}

std::pair<WorldState, StepOutcome> Environment::step(const WorldState& state, const Action& action) const {
  if (state.terminated) throw UsageError("step: episode already terminated; call reset");
  const int k = scene_.arm.num_links();
  if (action.joint_velocity_commands.size() != k) {
    throw InputError("step: expected " + std::to_string(k) + " joint velocity commands");
  }
  WorldState next = state;
  for (int i = 0; i < k; ++i) {
    const double cmd = action.joint_velocity_commands[i];
    if (!std::isfinite(cmd)) throw InputError("step: non-finite action component");
    const double v = std::clamp(cmd, -1.0, 1.0) * scene_.arm.max_joint_velocity;
    const auto& lim = scene_.arm.joint_limits[i];
    next.joint_angles[i] = std::clamp(state.joint_angles[i] + v, lim.low, lim.high);
  }
  next.step_index = state.step_index + 1;

  const auto points = forward_kinematics(next.joint_angles, scene_.arm);
  const Point& ee = points.back();

  StepOutcome out;
  out.end_effector = ee;
  out.collided = collision_check(points, next.obstacles);
  if (!next.carrying && (ee - next.object_position).norm() <= scene_.grasp_radius) {
    next.carrying = true;
    out.grasped = true;
  }
  if (next.carrying) next.object_position = ee;
  out.success = next.carrying && (ee - next.goal_center).norm() <= next.goal_radius;
  out.terminated = out.success || next.step_index >= scene_.horizon;
  next.terminated = out.terminated;
  out.r_env = (out.success ? scene_.success_bonus : 0.0) + (out.collided ? scene_.collision_penalty : 0.0);
  out.distance_to_subgoal = distance_to_subgoal(next);
  out.observation = observe(next);
  return {std::move(next), std::move(out)};
}

}  // namespace rlihf
