#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlihf/env.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/sac.hpp"

namespace rlihf {

enum class FeedbackSource { simulated, stream, disabled };

struct FeedbackConfig {
  FeedbackSource source = FeedbackSource::simulated;
  /// Bank subject to use; empty selects the inline `observer`.
  std::string subject;
  ObserverModel observer{"inline", 0.8, 0.8, 10.0};
  /// Observer bank file; empty selects the built-in twelve-subject bank.
  std::string bank;
  /// Probability stream file (source = stream).
  std::string stream;
  double progress_tolerance = kDefaultProgressTolerance;
};

struct EvalConfig {
  long interval = 5000;
  int episodes = 10;
  int summary_episodes = 100;
};

struct SweepSpec {
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<long> seeds{0, 1, 2, 3, 4};
  /// Bank subject ids, "inline" for feedback.observer; empty = every bank subject.
  std::vector<std::string> subjects{"inline"};
  bool include_baseline = true;
};

struct LosoSpec {
  std::vector<std::string> subjects;  // empty = every bank subject
};

struct ExperimentConfig {
  std::string scene_preset = "planar3";
  SceneSpec scene = default_scene();
  /// Success is absorbing and keeps paying its bonus: 1 / (1 - gamma).
  SacConfig sac = [] {
    SacConfig c;
    c.terminal_value = 100.0;
    return c;
  }();
  double alpha = 0.3;
  FeedbackConfig feedback;
  long total_timesteps = 200000;
  std::uint64_t master_seed = 0;
  long seed = 0;
  EvalConfig eval;
  std::string output_dir = "runs";
  bool log_train_episodes = true;
  SweepSpec sweep;
  LosoSpec loso;

  void validate() const;
};

/// Built-in defaults in their JSON form; defines the set of known keys.
nlohmann::json default_config_json(const std::string& scene_preset = "planar3");

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Defaults, then `doc`, then `overrides` ("dotted.path=value"), then
/// validation. Unknown keys and type mismatches raise ConfigError naming
/// the field path.
ExperimentConfig resolve_config(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Applies one "a.b.c=value" override in place; the path must already exist.
void apply_override(nlohmann::json& doc, const std::string& assignment);

std::vector<ObserverModel> resolve_observer_bank(const ExperimentConfig& cfg);

const char* to_string(FeedbackSource source);

}  // namespace rlihf
