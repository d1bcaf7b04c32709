#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlihf/env.hpp"

namespace rlihf {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct EpisodeRecord {
  std::string kind = "train";  // "train" or "eval"
  long episode_index = 0;
  long global_step_at_start = 0;
  std::vector<Point> end_effector_path;  // reset pose first, one point per step after
  std::vector<double> per_step_r_env;
  std::vector<double> per_step_r_total;
  int collision_steps = 0;
  bool success = false;

  double env_return() const;
  double total_return() const;
};

nlohmann::json to_json(const EpisodeRecord& record, int workspace_dim);
EpisodeRecord episode_from_json(const nlohmann::json& j);

/// Mean and population standard deviation; throws UsageError when empty.
MeanStd mean_std(std::span<const double> values);

/// Straight-line displacement over polyline arc length, in (0, 1].
/// Zero-length paths count as perfectly efficient.
double path_efficiency(std::span<const Point> path);

MeanStd success_rate(std::span<const EpisodeRecord> records);
MeanStd mean_collision(std::span<const EpisodeRecord> records);
MeanStd path_efficiency_stats(std::span<const EpisodeRecord> records);

struct CurvePoint {
  long step = 0;
  double value = 0.0;
};
using ReturnCurve = std::vector<CurvePoint>;

struct EvalLog {
  long step = 0;
  std::vector<double> returns;
};

/// Mean evaluation return per checkpoint; steps must strictly increase.
ReturnCurve build_return_curve(std::span<const EvalLog> logs);

/// Trapezoidal area under a curve over its own step range.
double area_under_curve(const ReturnCurve& curve);

/// Trailing moving average over `window` checkpoints.
ReturnCurve smooth_curve(const ReturnCurve& curve, int window);

/// First step at which the smoothed curve reaches `threshold`; `censored`
/// when it never does.
long steps_to_threshold(const ReturnCurve& curve, double threshold, int window, long censored);

/// Last point of the smoothed curve: the mean of the final `window` values.
double final_value(const ReturnCurve& curve, int window);

inline constexpr int kSmoothingWindow = 3;
inline constexpr double kThresholdFraction = 0.8;

struct RunSummary {
  MeanStd success_rate;
  MeanStd path_efficiency;
  MeanStd mean_collision;
  ReturnCurve return_curve;
};

RunSummary summarize(std::span<const EpisodeRecord> final_eval_episodes, const ReturnCurve& curve);

/// One row of the per-method summary table.
struct SummaryRow {
  std::string method;  // "sparse" or "rlihf"
  double alpha = 0.0;
  std::string subject = "none";
  MeanStd success_rate;
  MeanStd path_efficiency;
  MeanStd mean_collision;
};

inline constexpr const char* kSummaryHeader =
    "method,alpha,subject,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,"
    "mean_collision_mean,mean_collision_std";

/// Fixed formatting used by every emitted table (9 significant digits).
std::string format_number(double v);

std::string to_csv_line(const SummaryRow& row);
void write_summary_table(const std::filesystem::path& path, std::vector<SummaryRow> rows);
std::vector<SummaryRow> read_summary_table(const std::filesystem::path& path);

/// Sorting key shared by all aggregated tables: method, alpha, subject.
bool summary_order(const SummaryRow& a, const SummaryRow& b);

}  // namespace rlihf
