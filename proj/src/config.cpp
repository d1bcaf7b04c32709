#include "rlihf/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rlihf/errors.hpp"

namespace rlihf {

using nlohmann::json;

namespace {

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int d = 0; d < dim; ++d) a.push_back(p[d]);
  return a;
}

json scene_json(const SceneSpec& s) {
  const int dim = s.arm.workspace_dim();
  json limits = json::array();
  for (const auto& l : s.arm.joint_limits) limits.push_back({l.low, l.high});
  json obstacles = json::array();
  for (const auto& o : s.obstacles) obstacles.push_back({{"center", point_json(o.center, dim)}, {"radius", o.radius}});
  return {{"link_lengths", s.arm.link_lengths},
          {"joint_limits", limits},
          {"max_joint_velocity", s.arm.max_joint_velocity},
          {"spatial", s.arm.spatial},
          {"home_pose", s.home_pose},
          {"obstacles", obstacles},
          {"object_position", point_json(s.object_position, dim)},
          {"object_placement", s.object_placement == ObjectPlacement::uniform ? "uniform" : "fixed"},
          {"object_jitter", s.object_jitter},
          {"goal_center", point_json(s.goal_center, dim)},
          {"goal_radius", s.goal_radius},
          {"grasp_radius", s.grasp_radius},
          {"horizon", s.horizon},
          {"success_bonus", s.success_bonus},
          {"collision_penalty", s.collision_penalty}};
}

json observer_json(const ObserverModel& m) {
  return {{"subject_id", m.subject_id}, {"tpr", m.tpr}, {"tnr", m.tnr}, {"sharpness", m.sharpness}};
}

SceneSpec preset_scene(const std::string& name) {
  if (name == "planar3") return default_scene();
  if (name == "spatial7") return spatial_scene();
  throw ConfigError("scene.preset: unknown preset '" + name + "' (expected planar3 or spatial7)");
}

// Recursively rejects object keys that the defaults do not define.
void check_known_keys(const json& user, const json& known, const std::string& prefix) {
  if (!user.is_object() || !known.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError(path + ": unknown key");
    check_known_keys(it.value(), known.at(it.key()), path);
  }
}

// Typed field access with path-qualified errors.
class Reader {
 public:
  Reader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {}

  const json& raw(const std::string& key) const {
    if (!doc_.contains(key)) throw ConfigError(where(key) + ": missing");
    return doc_.at(key);
  }

  template <typename T>
  T get(const std::string& key) const {
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("string");
      }
      return v.get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(where(key) + ": expected " + expected_name<T>() + ", got " + v.dump());
    }
  }

  Point point(const std::string& key, int dim) const {
    const json& v = raw(key);
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
      throw ConfigError(where(key) + ": expected a " + std::to_string(dim) + "-element coordinate array");
    }
    Point p = Point::Zero();
    for (int d = 0; d < dim; ++d) {
      if (!v[d].is_number()) throw ConfigError(where(key) + "[" + std::to_string(d) + "]: expected number");
      p[d] = v[d].get<double>();
    }
    return p;
  }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  Reader child(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_object()) throw ConfigError(where(key) + ": expected an object");
    return Reader(v, where(key));
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <typename T>
  static std::string expected_name() {
    if constexpr (std::is_same_v<T, double>) return "number";
    else if constexpr (std::is_same_v<T, bool>) return "boolean";
    else if constexpr (std::is_integral_v<T>) return "integer";
    else return "string";
  }

  const json& doc_;
  std::string path_;
};

SceneSpec parse_scene(const Reader& r) {
  SceneSpec s;
  s.arm.spatial = r.get<bool>("spatial");
  const int dim = s.arm.spatial ? 3 : 2;
  s.arm.link_lengths = r.numbers("link_lengths");
  const json& limits = r.raw("joint_limits");
  if (!limits.is_array()) throw ConfigError(r.where("joint_limits") + ": expected an array of [low, high] pairs");
  for (std::size_t i = 0; i < limits.size(); ++i) {
    const json& l = limits[i];
    if (!l.is_array() || l.size() != 2 || !l[0].is_number() || !l[1].is_number()) {
      throw ConfigError(r.where("joint_limits") + "[" + std::to_string(i) + "]: expected [low, high]");
    }
    s.arm.joint_limits.push_back({l[0].get<double>(), l[1].get<double>()});
  }
  s.arm.max_joint_velocity = r.get<double>("max_joint_velocity");
  s.home_pose = r.numbers("home_pose");
  const json& obstacles = r.raw("obstacles");
  if (!obstacles.is_array()) throw ConfigError(r.where("obstacles") + ": expected an array");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (!obstacles[i].is_object()) {
      throw ConfigError(r.where("obstacles") + "[" + std::to_string(i) + "]: expected an object");
    }
    Reader o(obstacles[i], r.where("obstacles") + "." + std::to_string(i));
    s.obstacles.push_back({o.point("center", dim), o.get<double>("radius")});
  }
  s.object_position = r.point("object_position", dim);
  const auto placement = r.get<std::string>("object_placement");
  if (placement == "uniform") {
    s.object_placement = ObjectPlacement::uniform;
  } else if (placement == "fixed") {
    s.object_placement = ObjectPlacement::fixed;
  } else {
    throw ConfigError(r.where("object_placement") + ": expected 'fixed' or 'uniform'");
  }
  s.object_jitter = r.get<double>("object_jitter");
  s.goal_center = r.point("goal_center", dim);
  s.goal_radius = r.get<double>("goal_radius");
  s.grasp_radius = r.get<double>("grasp_radius");
  s.horizon = r.get<int>("horizon");
  s.success_bonus = r.get<double>("success_bonus");
  s.collision_penalty = r.get<double>("collision_penalty");
  return s;
}

SacConfig parse_sac(const Reader& r) {
  SacConfig c;
  c.gamma = r.get<double>("gamma");
  c.tau = r.get<double>("tau");
  c.actor_lr = r.get<double>("actor_lr");
  c.critic_lr = r.get<double>("critic_lr");
  c.temperature_lr = r.get<double>("temperature_lr");
  c.batch_size = r.get<int>("batch_size");
  const long capacity = r.get<long>("buffer_capacity");
  if (capacity < 1) throw ConfigError(r.where("buffer_capacity") + ": must be >= 1");
  c.buffer_capacity = static_cast<std::size_t>(capacity);
  c.initial_temperature = r.get<double>("initial_temperature");
  if (r.has("target_entropy") && !r.raw("target_entropy").is_null()) c.target_entropy = r.get<double>("target_entropy");
  c.update_to_data_ratio = r.get<int>("update_to_data_ratio");
  c.warmup_steps = r.get<long>("warmup_steps");
  c.terminal_value = r.get<double>("terminal_value");
  const json& hidden = r.raw("hidden_sizes");
  if (!hidden.is_array()) throw ConfigError(r.where("hidden_sizes") + ": expected an array of integers");
  c.hidden_sizes.clear();
  for (const auto& h : hidden) {
    if (!h.is_number_integer()) throw ConfigError(r.where("hidden_sizes") + ": expected integers");
    c.hidden_sizes.push_back(h.get<int>());
  }
  return c;
}

ObserverModel parse_observer(const Reader& r) {
  return {r.get<std::string>("subject_id"), r.get<double>("tpr"), r.get<double>("tnr"), r.get<double>("sharpness")};
}

FeedbackSource parse_source(const std::string& s, const std::string& where) {
  if (s == "simulated") return FeedbackSource::simulated;
  if (s == "stream") return FeedbackSource::stream;
  if (s == "disabled") return FeedbackSource::disabled;
  throw ConfigError(where + ": expected 'simulated', 'stream' or 'disabled'");
}

std::vector<std::string> parse_subjects(const Reader& r) {
  const json& v = r.raw("subjects");
  const std::string expected = r.where("subjects") + ": expected \"all\" or a list of ids";
  std::vector<std::string> out;
  if (v.is_string()) {
    if (v.get<std::string>() != "all") throw ConfigError(expected);
    return out;
  }
  if (!v.is_array()) throw ConfigError(expected);
  for (const auto& s : v) {
    if (!s.is_string()) throw ConfigError(r.where("subjects") + ": expected subject id strings");
    out.push_back(s.get<std::string>());
  }
  if (out.empty()) throw ConfigError(r.where("subjects") + ": must not be empty");
  return out;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

std::string preset_of(const json& doc, const std::vector<std::string>& overrides) {
  std::string preset = "planar3";
  if (doc.contains("scene") && doc["scene"].is_object() && doc["scene"].contains("preset")) {
    if (!doc["scene"]["preset"].is_string()) throw ConfigError("scene.preset: expected string");
    preset = doc["scene"]["preset"].get<std::string>();
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq != std::string::npos && o.substr(0, eq) == "scene.preset") {
      const json v = parse_value(o.substr(eq + 1));
      if (!v.is_string()) throw ConfigError("scene.preset: expected string");
      preset = v.get<std::string>();
    }
  }
  return preset;
}

}  // namespace

const char* to_string(FeedbackSource source) {
  switch (source) {
    case FeedbackSource::simulated: return "simulated";
    case FeedbackSource::stream: return "stream";
    case FeedbackSource::disabled: return "disabled";
  }
  return "disabled";
}

void ExperimentConfig::validate() const {
  scene.validate();
  sac.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha: must be >= 0 (got " + std::to_string(alpha) + ")");
  }
  if (total_timesteps < 1) throw ConfigError("total_timesteps: must be positive");
  if (total_timesteps <= sac.warmup_steps) {
    throw ConfigError("total_timesteps: must exceed sac.warmup_steps (" + std::to_string(sac.warmup_steps) + ")");
  }
  if (seed < 0) throw ConfigError("seed: must be >= 0");
  if (eval.interval < 1) throw ConfigError("eval.interval: must be positive");
  if (eval.episodes < 1) throw ConfigError("eval.episodes: must be positive");
  if (eval.summary_episodes < 1) throw ConfigError("eval.summary_episodes: must be positive");
  if (!(feedback.progress_tolerance >= 0.0)) throw ConfigError("feedback.progress_tolerance: must be >= 0");
  feedback.observer.validate();
  if (feedback.source == FeedbackSource::stream && feedback.stream.empty()) {
    throw ConfigError("feedback.stream: required when feedback.source is 'stream'");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  if (sweep.alphas.empty()) throw ConfigError("sweep.alphas: must not be empty");
  if (sweep.seeds.empty()) throw ConfigError("sweep.seeds: must not be empty");
  for (std::size_t i = 0; i < sweep.alphas.size(); ++i) {
    if (!(sweep.alphas[i] >= 0.0) || !std::isfinite(sweep.alphas[i])) {
      throw ConfigError("sweep.alphas[" + std::to_string(i) + "]: must be >= 0");
    }
  }
  for (long s : sweep.seeds) {
    if (s < 0) throw ConfigError("sweep.seeds: seeds must be >= 0");
  }
  auto no_duplicates = [](auto v, const char* what) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
      throw ConfigError(std::string(what) + ": duplicate entries");
    }
  };
  no_duplicates(sweep.alphas, "sweep.alphas");
  no_duplicates(sweep.seeds, "sweep.seeds");
  no_duplicates(sweep.subjects, "sweep.subjects");
  no_duplicates(loso.subjects, "loso.subjects");
}

json default_config_json(const std::string& scene_preset) {
  ExperimentConfig cfg;
  cfg.scene_preset = scene_preset;
  cfg.scene = preset_scene(scene_preset);
  return to_json(cfg);
}

json to_json(const ExperimentConfig& c) {
  json scene = scene_json(c.scene);
  scene["preset"] = c.scene_preset;
  const auto& s = c.sac;
  json sac = {{"gamma", s.gamma},
              {"tau", s.tau},
              {"actor_lr", s.actor_lr},
              {"critic_lr", s.critic_lr},
              {"temperature_lr", s.temperature_lr},
              {"batch_size", s.batch_size},
              {"buffer_capacity", s.buffer_capacity},
              {"initial_temperature", s.initial_temperature},
              {"target_entropy", s.target_entropy ? json(*s.target_entropy) : json(nullptr)},
              {"update_to_data_ratio", s.update_to_data_ratio},
              {"warmup_steps", s.warmup_steps},
              {"hidden_sizes", s.hidden_sizes},
              {"terminal_value", s.terminal_value}};
  json feedback = {{"source", to_string(c.feedback.source)},
                   {"subject", c.feedback.subject},
                   {"observer", observer_json(c.feedback.observer)},
                   {"bank", c.feedback.bank},
                   {"stream", c.feedback.stream},
                   {"progress_tolerance", c.feedback.progress_tolerance}};
  auto subjects = [](const std::vector<std::string>& v) { return v.empty() ? json("all") : json(v); };
  return {{"scene", scene},
          {"sac", sac},
          {"alpha", c.alpha},
          {"feedback", feedback},
          {"total_timesteps", c.total_timesteps},
          {"master_seed", c.master_seed},
          {"seed", c.seed},
          {"eval",
           {{"interval", c.eval.interval}, {"episodes", c.eval.episodes}, {"summary_episodes", c.eval.summary_episodes}}},
          {"output_dir", c.output_dir},
          {"log_train_episodes", c.log_train_episodes},
          {"sweep",
           {{"alphas", c.sweep.alphas},
            {"seeds", c.sweep.seeds},
            {"subjects", subjects(c.sweep.subjects)},
            {"include_baseline", c.sweep.include_baseline}}},
          {"loso", {{"subjects", subjects(c.loso.subjects)}}}};
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  const std::string path = assignment.substr(0, eq);
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& key = parts[i];
    if (node->is_object()) {
      if (!node->contains(key)) throw ConfigError(path + ": unknown key");
      node = &(*node)[key];
    } else if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError(path + ": '" + key + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError(path + ": index " + key + " out of range");
      node = &(*node)[idx];
    } else {
      throw ConfigError(path + ": unknown key");
    }
  }
  *node = parse_value(assignment.substr(eq + 1));
}

ExperimentConfig resolve_config(const json& doc, const std::vector<std::string>& overrides) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object at top level");
  const std::string preset = preset_of(doc, overrides);
  json merged = default_config_json(preset);
  check_known_keys(doc, merged, "");
  merged.merge_patch(doc);
  for (const auto& o : overrides) apply_override(merged, o);

  const Reader root(merged, "");
  ExperimentConfig cfg;
  cfg.scene_preset = preset;
  const Reader scene = root.child("scene");
  preset_scene(scene.get<std::string>("preset"));
  cfg.scene = parse_scene(scene);
  cfg.sac = parse_sac(root.child("sac"));
  cfg.alpha = root.get<double>("alpha");
  const Reader fb = root.child("feedback");
  cfg.feedback.source = parse_source(fb.get<std::string>("source"), fb.where("source"));
  cfg.feedback.subject = fb.get<std::string>("subject");
  cfg.feedback.observer = parse_observer(fb.child("observer"));
  cfg.feedback.bank = fb.get<std::string>("bank");
  cfg.feedback.stream = fb.get<std::string>("stream");
  cfg.feedback.progress_tolerance = fb.get<double>("progress_tolerance");
  cfg.total_timesteps = root.get<long>("total_timesteps");
  const json& ms = root.raw("master_seed");
  if (!ms.is_number_unsigned() && !(ms.is_number_integer() && ms.get<long long>() >= 0)) {
    throw ConfigError("master_seed: expected non-negative integer");
  }
  cfg.master_seed = ms.get<std::uint64_t>();
  cfg.seed = root.get<long>("seed");
  const Reader ev = root.child("eval");
  cfg.eval.interval = ev.get<long>("interval");
  cfg.eval.episodes = ev.get<int>("episodes");
  cfg.eval.summary_episodes = ev.get<int>("summary_episodes");
  cfg.output_dir = root.get<std::string>("output_dir");
  cfg.log_train_episodes = root.get<bool>("log_train_episodes");
  const Reader sw = root.child("sweep");
  cfg.sweep.alphas = sw.numbers("alphas");
  cfg.sweep.seeds.clear();
  const json& seeds = sw.raw("seeds");
  if (!seeds.is_array()) throw ConfigError("sweep.seeds: expected an array of integers");
  for (const auto& s : seeds) {
    if (!s.is_number_integer()) throw ConfigError("sweep.seeds: expected integers");
    cfg.sweep.seeds.push_back(s.get<long>());
  }
  cfg.sweep.subjects = parse_subjects(sw);
  cfg.loso.subjects = parse_subjects(root.child("loso"));
  cfg.sweep.include_baseline = sw.get<bool>("include_baseline");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return resolve_config(doc, overrides);
}

std::vector<ObserverModel> resolve_observer_bank(const ExperimentConfig& cfg) {
  if (cfg.feedback.bank.empty()) return default_observer_bank();
  return load_observer_bank(cfg.feedback.bank);
}

}  // namespace rlihf
