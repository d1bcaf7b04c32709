#ifndef RLIHF_RLIHF_H
#define RLIHF_RLIHF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RLIHF_API __declspec(dllexport)
#else
#define RLIHF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are stable; 0, 2 and 3 double as CLI exit codes. */
typedef enum rlihf_status {
  RLIHF_OK = 0,
  RLIHF_ERR_INTERNAL = 1,
  RLIHF_ERR_CONFIG = 2,
  RLIHF_PARTIAL = 3,
  RLIHF_ERR_INPUT = 4,
  RLIHF_ERR_USAGE = 5,
  RLIHF_ERR_FORMAT = 6,
  RLIHF_ERR_IO = 7
} rlihf_status;

typedef struct rlihf_config rlihf_config;
typedef struct rlihf_env rlihf_env;
typedef struct rlihf_report rlihf_report;

/* Message of the last failed call on this thread; never NULL. */
RLIHF_API const char* rlihf_last_error(void);
RLIHF_API const char* rlihf_version(void);
RLIHF_API const char* rlihf_status_name(rlihf_status status);
RLIHF_API void rlihf_string_free(char* s);

/* Configuration. Overrides are "dotted.path=value" strings applied after the
   document and before validation. */
RLIHF_API rlihf_status rlihf_config_default(rlihf_config** out);
RLIHF_API rlihf_status rlihf_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                                         rlihf_config** out);
RLIHF_API rlihf_status rlihf_config_parse(const char* json_text, const char* const* overrides, size_t n_overrides,
                                          rlihf_config** out);
/* Applies one override and re-validates; the config is unchanged on failure. */
RLIHF_API rlihf_status rlihf_config_set(rlihf_config* cfg, const char* assignment);
/* Resolved configuration as JSON text; release with rlihf_string_free. */
RLIHF_API rlihf_status rlihf_config_to_json(const rlihf_config* cfg, char** out_json);
RLIHF_API void rlihf_config_free(rlihf_config* cfg);

/* Final-evaluation statistics of a run. */
typedef struct rlihf_summary {
  double success_rate_mean;
  double success_rate_std;
  double path_eff_mean;
  double path_eff_std;
  double mean_collision_mean;
  double mean_collision_std;
  double return_mean;
  uint64_t gradient_updates;
  int skipped; /* 1 when an existing completed run directory was reused */
} rlihf_summary;

/* Trains one run under <output_dir>/train/<alpha>/<subject>/<seed>.
   out_run_dir (optional) receives the directory; release with rlihf_string_free. */
RLIHF_API rlihf_status rlihf_train(const rlihf_config* cfg, int force, rlihf_summary* out_summary, char** out_run_dir);

/* Protocols return RLIHF_PARTIAL when some cells failed; the report is still
   produced and lists them. workers <= 0 selects the default worker count. */
RLIHF_API rlihf_status rlihf_sweep(const rlihf_config* cfg, int workers, int force, rlihf_report** out);
RLIHF_API rlihf_status rlihf_loso(const rlihf_config* cfg, int workers, int force, rlihf_report** out);
/* RLIHF_PARTIAL when cells are missing; written files and missing cells are listed. */
RLIHF_API rlihf_status rlihf_export_plots(const char* dir, rlihf_report** out);
/* Deterministic evaluation of a trained run directory's checkpoint. */
RLIHF_API rlihf_status rlihf_eval(const char* run_dir, int episodes, rlihf_summary* out);
RLIHF_API int rlihf_default_workers(void);

/* Reports: "items" are cell directories or written files, "problems" are
   failed or missing cells. Strings stay valid until rlihf_report_free. */
RLIHF_API const char* rlihf_report_root(const rlihf_report* r);
RLIHF_API size_t rlihf_report_item_count(const rlihf_report* r);
RLIHF_API const char* rlihf_report_item(const rlihf_report* r, size_t i);
RLIHF_API size_t rlihf_report_problem_count(const rlihf_report* r);
RLIHF_API const char* rlihf_report_problem(const rlihf_report* r, size_t i);
RLIHF_API void rlihf_report_free(rlihf_report* r);

/* Reward shaping primitive: r_hf = 0.5 - p, r_total = r_env + alpha * r_hf.
   Either output pointer may be NULL. */
RLIHF_API rlihf_status rlihf_shape_reward(double r_env, double p, double alpha, double* out_r_hf,
                                          double* out_r_total);

typedef struct rlihf_step {
  double r_env;
  double distance_to_subgoal;
  int terminated;
  int success;
  int collided;
  int grasped;
} rlihf_step;

/* Environment built from the config's scene. Observation buffers must hold
   rlihf_env_observation_dim() values. */
RLIHF_API rlihf_status rlihf_env_create(const rlihf_config* cfg, rlihf_env** out);
RLIHF_API size_t rlihf_env_observation_dim(const rlihf_env* env);
RLIHF_API size_t rlihf_env_action_dim(const rlihf_env* env);
RLIHF_API rlihf_status rlihf_env_reset(rlihf_env* env, uint64_t seed, double* out_observation);
RLIHF_API rlihf_status rlihf_env_step(rlihf_env* env, const double* action, rlihf_step* out_step,
                                      double* out_observation);
RLIHF_API void rlihf_env_free(rlihf_env* env);

#ifdef __cplusplus
}
#endif

#endif
