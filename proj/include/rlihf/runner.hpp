#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlihf/config.hpp"
#include "rlihf/metrics.hpp"
#include "rlihf/trainer.hpp"

namespace rlihf {

/// Subject label used by feedback-disabled (sparse) cells.
inline constexpr const char* kNoSubject = "none";
/// Sweep subject entry selecting feedback.observer instead of a bank subject.
inline constexpr const char* kInlineSubject = "inline";
/// Subject label of cells fed by a replayed probability stream.
inline constexpr const char* kStreamSubject = "stream";

/// One (method, alpha, subject, seed) training run of a protocol.
struct Cell {
  bool sparse = false;
  double alpha = 0.0;
  std::string subject = kNoSubject;
  long seed = 0;

  std::string method() const { return sparse ? "sparse" : "rlihf"; }
  std::string alpha_label() const;
  std::filesystem::path relative_dir() const;  // <alpha>/<subject>/<seed>
  bool operator<(const Cell& o) const;
  bool operator==(const Cell& o) const = default;
};

/// Decoder-stream salt of a cell; other streams depend on (master_seed, seed) only.
std::uint64_t decoder_salt(double alpha, const std::string& subject);

struct RunResult {
  RunSummary summary;
  std::vector<CurveRow> curve;
  std::uint64_t gradient_updates = 0;
  bool skipped = false;  // existing completed run reused
};

/// Files of a completed run directory.
inline constexpr const char* kCurveFile = "curve.csv";
inline constexpr const char* kEpisodesFile = "episodes.jsonl";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kStatsFile = "stats.json";
inline constexpr const char* kFinalEvalFile = "final_eval.csv";

/// Builds the per-cell configuration from a base config.
ExperimentConfig cell_config(const ExperimentConfig& base, const Cell& cell);

/// Full training loop for one configuration. A directory that already holds
/// summary.csv is reused unless `force` is set.
RunResult train_single(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, bool force);

/// <output_dir>/train/<alpha>/<subject>/<seed> for a single `train` invocation.
std::filesystem::path train_run_dir(const ExperimentConfig& cfg);

bool run_completed(const std::filesystem::path& run_dir);
std::vector<CurveRow> read_curve(const std::filesystem::path& path);

struct FinalEvalRow {
  bool success = false;
  double path_efficiency = 1.0;
  int collision_steps = 0;
};
std::vector<FinalEvalRow> read_final_eval(const std::filesystem::path& path);

ReturnCurve eval_curve(const std::vector<CurveRow>& rows);

/// Paired sparse-vs-shaped comparison of one seed.
struct PairedComparison {
  long seed = 0;
  double auc_rlihf = 0.0;
  double auc_sparse = 0.0;
  double threshold = 0.0;
  long steps_rlihf = 0;
  long steps_sparse = 0;
};

/// Threshold = kThresholdFraction of the sparse curve's smoothed final value.
PairedComparison compare_paired(long seed, const ReturnCurve& rlihf, const ReturnCurve& sparse, long censored);

struct ProtocolOutcome {
  std::filesystem::path root;
  std::vector<Cell> cells;
  std::vector<std::string> failures;  // "<cell dir>: <message>"
  bool ok() const { return failures.empty(); }
};

struct ProtocolOptions {
  int workers = 1;
  bool force = false;
  /// Cells are executed in this permuted order when non-empty (testing aid).
  std::vector<std::size_t> schedule;
};

std::vector<Cell> sweep_cells(const ExperimentConfig& cfg);
std::vector<Cell> loso_cells(const ExperimentConfig& cfg);

/// Alpha sweep: runs every cell under <output_dir>/sweep and writes
/// sweep_summary.csv and sweep_auc.csv.
ProtocolOutcome alpha_sweep(const ExperimentConfig& cfg, const ProtocolOptions& opts);

/// Per-subject runs at cfg.alpha with shared sparse baselines under
/// <output_dir>/loso; writes loso_report.csv and loso_summary.csv.
ProtocolOutcome loso_eval(const ExperimentConfig& cfg, const ProtocolOptions& opts);

/// Recomputes the aggregate tables of a protocol directory from its runs.
void aggregate_protocol(const std::filesystem::path& root);

struct ExportOutcome {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> missing;
};

/// Writes alpha_curves.csv (per method/alpha/subject mean and std over seeds)
/// and, for loso directories, one subject_<id>.csv per subject.
ExportOutcome export_plots(const std::filesystem::path& root);

struct LosoReportRow {
  std::string subject;
  double tpr = 0.0;
  double tnr = 0.0;
  double auc_rlihf = 0.0;
  double auc_sparse = 0.0;
  double auc_ratio = 0.0;
  double steps_rlihf_median = 0.0;
  double steps_sparse_median = 0.0;
  double steps_ratio = 0.0;
  int seeds_faster = 0;
  int seeds = 0;
};
std::vector<LosoReportRow> read_loso_report(const std::filesystem::path& path);

/// Deterministic evaluation of a trained run directory's checkpoint.
struct EvalReport {
  RunSummary summary;
  std::vector<double> returns;
};
EvalReport evaluate_run(const std::filesystem::path& run_dir, int episodes);

int default_worker_count();

}  // namespace rlihf
