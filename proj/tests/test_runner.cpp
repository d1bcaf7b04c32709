#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "rlihf/config.hpp"
#include "rlihf/errors.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/runner.hpp"
#include "test_util.hpp"

using namespace rlihf;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> ov{"total_timesteps=240",
                              "sac.warmup_steps=40",
                              "sac.hidden_sizes=[16,16]",
                              "sac.batch_size=16",
                              "sac.buffer_capacity=1000",
                              "eval.interval=80",
                              "eval.episodes=2",
                              "eval.summary_episodes=4",
                              "log_train_episodes=false",
                              "output_dir=\"" + out.string() + "\""};
  ov.insert(ov.end(), extra.begin(), extra.end());
  return resolve_config(nlohmann::json::object(), ov);
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("cell directories and seeds are pure functions of the cell") {
  const Cell sparse{true, 0.0, "none", 3};
  const Cell shaped{false, 0.3, "S02", 3};
  CHECK(sparse.relative_dir().generic_string() == "sparse/none/3");
  CHECK(shaped.relative_dir().generic_string() == "0.3/S02/3");
  CHECK(decoder_salt(0.3, "S02") == decoder_salt(0.3, "S02"));
  CHECK(decoder_salt(0.3, "S02") != decoder_salt(0.3, "S03"));
  CHECK(decoder_salt(0.3, "S02") != decoder_salt(0.4, "S02"));
  CHECK(decoder_salt(0.0, "x") == decoder_salt(-0.0, "x"));
}

TEST_CASE("sweep and loso cell sets") {
  TempDir dir;
  ExperimentConfig cfg = tiny(dir.path);
  auto cells = sweep_cells(cfg);
  CHECK(cells.size() == 6 * 5);  // alpha 0 is the sparse baseline
  CHECK(std::count_if(cells.begin(), cells.end(), [](const Cell& c) { return c.sparse; }) == 5);

  cfg = tiny(dir.path, {"sweep.alphas=[0.2,0.3]", "sweep.seeds=[1]", "sweep.subjects=[\"S01\",\"inline\"]"});
  cells = sweep_cells(cfg);
  CHECK(cells.size() == 2 * 2 + 1);

  cfg = tiny(dir.path);
  cells = loso_cells(cfg);
  CHECK(cells.size() == 12 * 5 + 5);
  cfg = tiny(dir.path, {"loso.subjects=[\"S99\"]"});
  CHECK_THROWS_AS(loso_eval(cfg, {}), ConfigError);
  cfg = tiny(dir.path, {"loso.subjects=[\"inline\"]"});
  CHECK_THROWS_AS(loso_eval(cfg, {}), ConfigError);
}

TEST_CASE("zero alpha and disabled feedback give byte-identical curves") {
  TempDir dir;
  const ExperimentConfig a = tiny(dir.path, {"alpha=0"});
  const ExperimentConfig b = tiny(dir.path, {"alpha=0.3", "feedback.source=disabled"});
  train_single(a, dir.path / "a", false);
  train_single(b, dir.path / "b", false);
  CHECK(slurp(dir.path / "a" / kCurveFile) == slurp(dir.path / "b" / kCurveFile));
  CHECK(slurp(dir.path / "a" / kFinalEvalFile) == slurp(dir.path / "b" / kFinalEvalFile));
  CHECK(slurp(dir.path / "a" / kCurveFile).rfind("step,eval_return_mean,train_return\n", 0) == 0);
}

TEST_CASE("a single run writes its artifacts and resumes as a no-op") {
  TempDir dir;
  const ExperimentConfig cfg = tiny(dir.path);
  const fs::path run = train_run_dir(cfg);
  CHECK(run == dir.path / "train" / "0.3" / "inline" / "0");
  const RunResult first = train_single(cfg, run, false);
  CHECK_FALSE(first.skipped);
  CHECK(first.gradient_updates == 240 - 40);
  for (const char* f : {kCurveFile, kEpisodesFile, kSummaryFile, kCheckpointFile, kConfigFile, kStatsFile, kFinalEvalFile}) {
    CHECK(fs::exists(run / f));
  }
  CHECK(run_completed(run));
  CHECK(line_count(slurp(run / kCurveFile)) == 1 + 4);  // steps 0, 80, 160, 240
  CHECK(line_count(slurp(run / kEpisodesFile)) == 4 * 2);
  CHECK(read_final_eval(run / kFinalEvalFile).size() == 4);

  const auto before = fs::last_write_time(run / kCurveFile);
  const RunResult again = train_single(cfg, run, false);
  CHECK(again.skipped);
  CHECK(fs::last_write_time(run / kCurveFile) == before);
  CHECK(again.summary.success_rate.mean == first.summary.success_rate.mean);

  ExperimentConfig grown = cfg;
  grown.sweep.seeds = {0, 1, 2, 3, 4, 5};
  CHECK(train_single(grown, run, false).skipped);
  ExperimentConfig changed = cfg;
  changed.alpha = 0.4;
  CHECK_THROWS_AS(train_single(changed, run, false), ConfigError);

  fs::remove(run / kSummaryFile);  // an interrupted run is redone
  CHECK_FALSE(run_completed(run));
  CHECK_FALSE(train_single(cfg, run, false).skipped);

  const EvalReport rep = evaluate_run(run, 3);
  CHECK(rep.returns.size() == 3);
  CHECK_THROWS(evaluate_run(dir.path / "nowhere", 3));
}

TEST_CASE("sweep results do not depend on execution order or worker count") {
  TempDir a, b;
  const std::vector<std::string> ov{"sweep.alphas=[0,0.1,0.2,0.3,0.4,0.5]", "sweep.seeds=[0]"};
  const auto ra = alpha_sweep(tiny(a.path, ov), {});
  REQUIRE(ra.ok());
  ProtocolOptions shuffled;
  shuffled.workers = 3;
  shuffled.schedule = {5, 2, 0, 4, 1, 3};
  const auto rb = alpha_sweep(tiny(b.path, ov), shuffled);
  REQUIRE(rb.ok());
  const std::string sa = slurp(ra.root / "sweep_summary.csv");
  CHECK(line_count(sa) == 1 + 6);
  CHECK(sa == slurp(rb.root / "sweep_summary.csv"));
  CHECK(slurp(ra.root / "sweep_auc.csv") == slurp(rb.root / "sweep_auc.csv"));
  for (const auto& cell : ra.cells) {
    CHECK(slurp(ra.root / cell.relative_dir() / kCurveFile) == slurp(rb.root / cell.relative_dir() / kCurveFile));
  }

  // a cell run alone matches the same cell inside the sweep
  const Cell cell = ra.cells.back();
  train_single(cell_config(tiny(a.path, ov), cell), a.path / "alone", false);
  CHECK(slurp(a.path / "alone" / kCurveFile) == slurp(ra.root / cell.relative_dir() / kCurveFile));

  const ExportOutcome ex = export_plots(ra.root);
  CHECK(ex.missing.empty());
  const std::string alpha_csv = slurp(ra.root / "alpha_curves.csv");
  CHECK(alpha_csv.rfind("method,alpha,subject,step,eval_return_mean,eval_return_std,seeds\n", 0) == 0);
  CHECK(line_count(alpha_csv) == 1 + 6 * 4);

  fs::remove(ra.root / ra.cells.front().relative_dir() / kSummaryFile);
  const ExportOutcome partial = export_plots(ra.root);
  REQUIRE(partial.missing.size() == 1);
  CHECK(partial.missing.front().find(ra.cells.front().relative_dir().generic_string()) != std::string::npos);
}

TEST_CASE("failing cells are reported while the rest complete") {
  TempDir dir;
  write_probability_stream(dir.path / "short.csv", std::vector<double>(50, 0.3));
  const std::string stream = (dir.path / "short.csv").string();
  const auto out = alpha_sweep(tiny(dir.path, {"sweep.alphas=[0,0.3]", "sweep.seeds=[0]", "feedback.source=stream",
                                               "feedback.stream=\"" + stream + "\""}),
                               {});
  CHECK_FALSE(out.ok());
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures.front().find("0.3/stream/0") != std::string::npos);
  CHECK(run_completed(out.root / "sparse" / "none" / "0"));
  CHECK(line_count(slurp(out.root / "sweep_summary.csv")) == 1 + 1);

  // the baseline is reused by a sweep with different feedback settings
  const auto again = alpha_sweep(tiny(dir.path, {"sweep.alphas=[0,0.3]", "sweep.seeds=[0]"}), {});
  CHECK(again.ok());
}

TEST_CASE("loso pairs each subject with the shared sparse baselines") {
  TempDir dir;
  const auto out = loso_eval(tiny(dir.path, {"loso.subjects=[\"S01\",\"S12\"]", "sweep.seeds=[0,1]"}), {});
  REQUIRE(out.ok());
  CHECK(out.cells.size() == 2 * 2 + 2);
  const auto report = read_loso_report(out.root / "loso_report.csv");
  REQUIRE(report.size() == 2);
  CHECK(report[0].subject == "S01");
  CHECK(report[0].tpr == doctest::Approx(0.60));
  CHECK(report[0].seeds == 2);
  CHECK(line_count(slurp(out.root / "loso_summary.csv")) == 1 + 3);
  const auto ex = export_plots(out.root);
  CHECK(ex.missing.empty());
  CHECK(fs::exists(out.root / "subject_S01.csv"));
  CHECK(fs::exists(out.root / "subject_S12.csv"));
}

TEST_CASE("paired comparison of curves") {
  const ReturnCurve fast{{0, 0.0}, {10, 1.0}, {20, 1.0}, {30, 1.0}};
  const ReturnCurve slow{{0, 0.0}, {10, 0.0}, {20, 0.0}, {30, 1.0}};
  const auto c = compare_paired(4, fast, slow, 40);
  CHECK(c.seed == 4);
  CHECK(c.auc_rlihf > c.auc_sparse);
  CHECK(c.steps_rlihf < c.steps_sparse);
}
