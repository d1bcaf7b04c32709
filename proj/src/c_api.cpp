#include "rlihf/rlihf.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "rlihf/config.hpp"
#include "rlihf/errors.hpp"
#include "rlihf/runner.hpp"

struct rlihf_config {
  rlihf::ExperimentConfig cfg;
  nlohmann::json doc;  // resolved form, the base for further overrides
};

struct rlihf_env {
  rlihf::Environment env;
  std::optional<rlihf::WorldState> state;
};

struct rlihf_report {
  std::string root;
  std::vector<std::string> items;
  std::vector<std::string> problems;
};

namespace {

thread_local std::string g_last_error;

rlihf_status status_of(const rlihf::Error& e) {
  switch (e.kind()) {
    case rlihf::ErrorKind::config: return RLIHF_ERR_CONFIG;
    case rlihf::ErrorKind::input: return RLIHF_ERR_INPUT;
    case rlihf::ErrorKind::usage: return RLIHF_ERR_USAGE;
    case rlihf::ErrorKind::format: return RLIHF_ERR_FORMAT;
    case rlihf::ErrorKind::io: return RLIHF_ERR_IO;
  }
  return RLIHF_ERR_INTERNAL;
}

template <typename F>
rlihf_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const rlihf::Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return RLIHF_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RLIHF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RLIHF_ERR_INTERNAL;
  }
}

rlihf_status require(const void* p, const char* what) {
  if (p) return RLIHF_OK;
  g_last_error = std::string(what) + " must not be NULL";
  return RLIHF_ERR_USAGE;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> collect(const char* const* overrides, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    if (!overrides[i]) throw rlihf::UsageError("override " + std::to_string(i) + " is NULL");
    out.emplace_back(overrides[i]);
  }
  return out;
}

rlihf_config* make_config(rlihf::ExperimentConfig cfg) {
  auto* c = new rlihf_config{std::move(cfg), {}};
  c->doc = rlihf::to_json(c->cfg);
  return c;
}

void fill(rlihf_summary* out, const rlihf::RunSummary& s, double return_mean, std::uint64_t updates, bool skipped) {
  out->success_rate_mean = s.success_rate.mean;
  out->success_rate_std = s.success_rate.std;
  out->path_eff_mean = s.path_efficiency.mean;
  out->path_eff_std = s.path_efficiency.std;
  out->mean_collision_mean = s.mean_collision.mean;
  out->mean_collision_std = s.mean_collision.std;
  out->return_mean = return_mean;
  out->gradient_updates = updates;
  out->skipped = skipped ? 1 : 0;
}

rlihf_status protocol(const rlihf_config* cfg, int workers, int force, rlihf_report** out, bool loso) {
  if (auto s = require(cfg, "config"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  *out = nullptr;
  return guarded([&] {
    rlihf::ProtocolOptions opts;
    opts.workers = workers > 0 ? workers : rlihf::default_worker_count();
    opts.force = force != 0;
    const auto outcome = loso ? rlihf::loso_eval(cfg->cfg, opts) : rlihf::alpha_sweep(cfg->cfg, opts);
    auto report = std::make_unique<rlihf_report>();
    report->root = outcome.root.string();
    for (const auto& c : outcome.cells) report->items.push_back(c.relative_dir().generic_string());
    report->problems = outcome.failures;
    *out = report.release();
    if (!outcome.ok()) {
      g_last_error = std::to_string(outcome.failures.size()) + " cell(s) failed";
      return RLIHF_PARTIAL;
    }
    return RLIHF_OK;
  });
}

}  // namespace

extern "C" {

const char* rlihf_last_error(void) { return g_last_error.c_str(); }

const char* rlihf_version(void) { return "1.0.0"; }

const char* rlihf_status_name(rlihf_status status) {
  switch (status) {
    case RLIHF_OK: return "ok";
    case RLIHF_ERR_INTERNAL: return "internal error";
    case RLIHF_ERR_CONFIG: return "config error";
    case RLIHF_PARTIAL: return "partial failure";
    case RLIHF_ERR_INPUT: return "input error";
    case RLIHF_ERR_USAGE: return "usage error";
    case RLIHF_ERR_FORMAT: return "format error";
    case RLIHF_ERR_IO: return "i/o error";
  }
  return "unknown status";
}

void rlihf_string_free(char* s) { std::free(s); }

rlihf_status rlihf_config_default(rlihf_config** out) {
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  *out = nullptr;
  return guarded([&] {
    *out = make_config(rlihf::resolve_config(nlohmann::json::object()));
    return RLIHF_OK;
  });
}

rlihf_status rlihf_config_load(const char* path, const char* const* overrides, size_t n_overrides, rlihf_config** out) {
  if (auto s = require(path, "path"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  if (n_overrides && !overrides) return require(overrides, "overrides");
  *out = nullptr;
  return guarded([&] {
    *out = make_config(rlihf::load_config(path, collect(overrides, n_overrides)));
    return RLIHF_OK;
  });
}

rlihf_status rlihf_config_parse(const char* json_text, const char* const* overrides, size_t n_overrides,
                                rlihf_config** out) {
  if (auto s = require(json_text, "json_text"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  if (n_overrides && !overrides) return require(overrides, "overrides");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      throw rlihf::ConfigError(std::string("config: ") + e.what());
    }
    *out = make_config(rlihf::resolve_config(doc, collect(overrides, n_overrides)));
    return RLIHF_OK;
  });
}

rlihf_status rlihf_config_set(rlihf_config* cfg, const char* assignment) {
  if (auto s = require(cfg, "config"); s != RLIHF_OK) return s;
  if (auto s = require(assignment, "assignment"); s != RLIHF_OK) return s;
  return guarded([&] {
    rlihf::ExperimentConfig next = rlihf::resolve_config(cfg->doc, {assignment});
    cfg->cfg = std::move(next);
    cfg->doc = rlihf::to_json(cfg->cfg);
    return RLIHF_OK;
  });
}

rlihf_status rlihf_config_to_json(const rlihf_config* cfg, char** out_json) {
  if (auto s = require(cfg, "config"); s != RLIHF_OK) return s;
  if (auto s = require(out_json, "out_json"); s != RLIHF_OK) return s;
  *out_json = nullptr;
  return guarded([&] {
    *out_json = dup_string(cfg->doc.dump(2));
    return RLIHF_OK;
  });
}

void rlihf_config_free(rlihf_config* cfg) { delete cfg; }

rlihf_status rlihf_train(const rlihf_config* cfg, int force, rlihf_summary* out_summary, char** out_run_dir) {
  if (auto s = require(cfg, "config"); s != RLIHF_OK) return s;
  if (out_run_dir) *out_run_dir = nullptr;
  return guarded([&] {
    const auto dir = rlihf::train_run_dir(cfg->cfg);
    const auto result = rlihf::train_single(cfg->cfg, dir, force != 0);
    if (out_summary) {
      const double final_return = result.curve.empty() ? 0.0 : result.curve.back().eval_return_mean;
      fill(out_summary, result.summary, final_return, result.gradient_updates, result.skipped);
    }
    if (out_run_dir) *out_run_dir = dup_string(dir.string());
    return RLIHF_OK;
  });
}

rlihf_status rlihf_sweep(const rlihf_config* cfg, int workers, int force, rlihf_report** out) {
  return protocol(cfg, workers, force, out, false);
}

rlihf_status rlihf_loso(const rlihf_config* cfg, int workers, int force, rlihf_report** out) {
  return protocol(cfg, workers, force, out, true);
}

rlihf_status rlihf_export_plots(const char* dir, rlihf_report** out) {
  if (auto s = require(dir, "dir"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  *out = nullptr;
  return guarded([&] {
    const auto result = rlihf::export_plots(dir);
    auto report = std::make_unique<rlihf_report>();
    report->root = dir;
    for (const auto& p : result.written) report->items.push_back(p.string());
    report->problems = result.missing;
    *out = report.release();
    if (!result.missing.empty()) {
      g_last_error = std::to_string(result.missing.size()) + " cell(s) incomplete";
      return RLIHF_PARTIAL;
    }
    return RLIHF_OK;
  });
}

rlihf_status rlihf_eval(const char* run_dir, int episodes, rlihf_summary* out) {
  if (auto s = require(run_dir, "run_dir"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  return guarded([&] {
    const auto report = rlihf::evaluate_run(run_dir, episodes);
    fill(out, report.summary, rlihf::mean_std(report.returns).mean, 0, false);
    return RLIHF_OK;
  });
}

int rlihf_default_workers(void) { return rlihf::default_worker_count(); }

const char* rlihf_report_root(const rlihf_report* r) { return r ? r->root.c_str() : ""; }
size_t rlihf_report_item_count(const rlihf_report* r) { return r ? r->items.size() : 0; }
const char* rlihf_report_item(const rlihf_report* r, size_t i) {
  return r && i < r->items.size() ? r->items[i].c_str() : nullptr;
}
size_t rlihf_report_problem_count(const rlihf_report* r) { return r ? r->problems.size() : 0; }
const char* rlihf_report_problem(const rlihf_report* r, size_t i) {
  return r && i < r->problems.size() ? r->problems[i].c_str() : nullptr;
}
void rlihf_report_free(rlihf_report* r) { delete r; }

rlihf_status rlihf_shape_reward(double r_env, double p, double alpha, double* out_r_hf, double* out_r_total) {
  return guarded([&] {
    const auto s = rlihf::shape_reward(r_env, p, alpha);
    if (out_r_hf) *out_r_hf = s.r_hf;
    if (out_r_total) *out_r_total = s.r_total;
    return RLIHF_OK;
  });
}

rlihf_status rlihf_env_create(const rlihf_config* cfg, rlihf_env** out) {
  if (auto s = require(cfg, "config"); s != RLIHF_OK) return s;
  if (auto s = require(out, "out"); s != RLIHF_OK) return s;
  *out = nullptr;
  return guarded([&] {
    *out = new rlihf_env{rlihf::Environment(cfg->cfg.scene), std::nullopt};
    return RLIHF_OK;
  });
}

size_t rlihf_env_observation_dim(const rlihf_env* env) {
  return env ? static_cast<size_t>(env->env.observation_dim()) : 0;
}

size_t rlihf_env_action_dim(const rlihf_env* env) { return env ? static_cast<size_t>(env->env.action_dim()) : 0; }

rlihf_status rlihf_env_reset(rlihf_env* env, uint64_t seed, double* out_observation) {
  if (auto s = require(env, "env"); s != RLIHF_OK) return s;
  return guarded([&] {
    env->state = env->env.reset(seed);
    if (out_observation) {
      const Eigen::VectorXd obs = env->env.observe(*env->state);
      std::memcpy(out_observation, obs.data(), sizeof(double) * static_cast<size_t>(obs.size()));
    }
    return RLIHF_OK;
  });
}

rlihf_status rlihf_env_step(rlihf_env* env, const double* action, rlihf_step* out_step, double* out_observation) {
  if (auto s = require(env, "env"); s != RLIHF_OK) return s;
  if (auto s = require(action, "action"); s != RLIHF_OK) return s;
  return guarded([&] {
    if (!env->state) throw rlihf::UsageError("env_step called before env_reset");
    rlihf::Action a;
    a.joint_velocity_commands = Eigen::Map<const Eigen::VectorXd>(action, env->env.action_dim());
    auto [next, outcome] = env->env.step(*env->state, a);
    env->state = std::move(next);
    if (out_step) {
      out_step->r_env = outcome.r_env;
      out_step->distance_to_subgoal = outcome.distance_to_subgoal;
      out_step->terminated = outcome.terminated;
      out_step->success = outcome.success;
      out_step->collided = outcome.collided;
      out_step->grasped = outcome.grasped;
    }
    if (out_observation) {
      std::memcpy(out_observation, outcome.observation.data(),
                  sizeof(double) * static_cast<size_t>(outcome.observation.size()));
    }
    return RLIHF_OK;
  });
}

void rlihf_env_free(rlihf_env* env) { delete env; }

}  // extern "C"
