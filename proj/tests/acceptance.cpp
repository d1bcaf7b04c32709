// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Long training protocols persist their run
// directories under RLIHF_ACCEPTANCE_DIR and are reused when complete.
//
// usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include <Eigen/Geometry>

#include "gradcheck.hpp"
#include "rlihf/config.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/metrics.hpp"
#include "rlihf/runner.hpp"

using namespace rlihf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path work_dir() {
  if (const char* d = std::getenv("RLIHF_ACCEPTANCE_DIR"); d && *d) return d;
  return RLIHF_ACCEPTANCE_DEFAULT_DIR;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig base_config(const fs::path& out, const std::vector<std::string>& extra) {
  std::vector<std::string> ov{"output_dir=\"" + out.string() + "\"", "log_train_episodes=false"};
  ov.insert(ov.end(), extra.begin(), extra.end());
  return resolve_config(nlohmann::json::object(), ov);
}

// CPU seconds spent training the protocol's cells, from their stats files.
double training_seconds(const ProtocolOutcome& o) {
  double total = 0.0;
  for (const auto& c : o.cells) {
    const auto stats = nlohmann::json::parse(read_file(o.root / c.relative_dir() / kStatsFile));
    total += stats.at("wall_seconds").get<double>();
  }
  return total;
}

std::string failures_of(const ProtocolOutcome& o) {
  std::string s;
  for (const auto& f : o.failures) s += (s.empty() ? "" : "; ") + f;
  return s;
}

ReturnCurve curve_of(const ProtocolOutcome& o, const Cell& c) {
  return eval_curve(read_curve(o.root / c.relative_dir() / kCurveFile));
}

// ---------------------------------------------------------------------------

Verdict shaping_grid() {
  const auto t0 = Clock::now();
  long cases = 0, mismatches = 0;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double r_env = -0.1 + 1.1 * i / 9.0;
    for (int j = 0; j < 25; ++j) {
      const double p = j / 24.0;
      for (int k = 0; k < 40; ++k) {
        const double alpha = 2.0 * k / 39.0;
        const auto s = shape_reward(r_env, p, alpha);
        // rounding-exact reference and an extended-precision bound
        const double hf = 0.5 - p;
        const double total = r_env + alpha * hf;
        const long double wide = static_cast<long double>(r_env) +
                                 static_cast<long double>(alpha) * (0.5L - static_cast<long double>(p));
        worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(s.r_total) - wide)));
        mismatches += s.r_hf != hf || s.r_total != total;
        ++cases;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {cases == 10000 && mismatches == 0 && worst < 1e-15 && secs < 1.0,
          fmt("%ld grid points, %ld mismatches, max deviation from extended precision %.2g, %.3f s", cases, mismatches,
              worst, secs)};
}

Verdict zero_alpha_identity() {
  const fs::path dir = work_dir() / "identity";
  const auto t0 = Clock::now();
  const ExperimentConfig shaped = base_config(dir, {"total_timesteps=20000", "alpha=0", "master_seed=11"});
  const ExperimentConfig sparse =
      base_config(dir, {"total_timesteps=20000", "alpha=0.3", "feedback.source=disabled", "master_seed=11"});
  train_single(shaped, dir / "alpha0", true);
  train_single(sparse, dir / "disabled", true);
  const double secs = seconds_since(t0);
  const std::string a = read_file(dir / "alpha0" / kCurveFile);
  const std::string b = read_file(dir / "disabled" / kCurveFile);
  const bool same = !a.empty() && a == b;
  return {same && secs < 300.0,
          fmt("curve files %s (%zu bytes), 2 x 20000 steps in %.1f s", same ? "identical" : "differ", a.size(), secs)};
}

Verdict gradient_checks() {
  const auto t0 = Clock::now();
  gradcheck::Result worst;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = gradcheck::check(seed);
    worst.critic = std::max(worst.critic, r.critic);
    worst.actor = std::max(worst.actor, r.actor);
    worst.temperature = std::max(worst.temperature, r.temperature);
  }
  const double secs = seconds_since(t0);
  const bool ok = worst.critic < 1e-5 && worst.actor < 1e-5 && worst.temperature < 1e-5 && secs < 60.0;
  return {ok, fmt("50 configs, max relative error critic %.2g actor %.2g temperature %.2g, %.2f s", worst.critic,
                  worst.actor, worst.temperature, secs)};
}

Verdict reward_acceleration() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = base_config(
      work_dir() / "acceleration",
      {"sweep.alphas=[0.3]", "sweep.subjects=[\"inline\"]", "sweep.include_baseline=true", "sweep.seeds=[0,1,2,3,4]",
       "feedback.observer.tpr=0.8", "feedback.observer.tnr=0.8", "total_timesteps=200000"});
  ProtocolOptions opts;
  opts.workers = default_worker_count();
  const auto out = alpha_sweep(cfg, opts);
  if (!out.ok()) return {false, "failed cells: " + failures_of(out)};
  int auc_wins = 0;
  std::vector<double> steps_r, steps_s;
  std::string per_seed;
  for (long seed : cfg.sweep.seeds) {
    const auto pc = compare_paired(seed, curve_of(out, Cell{false, 0.3, kInlineSubject, seed}),
                                   curve_of(out, Cell{true, 0.0, kNoSubject, seed}), cfg.total_timesteps);
    auc_wins += pc.auc_rlihf > pc.auc_sparse;
    steps_r.push_back(static_cast<double>(pc.steps_rlihf));
    steps_s.push_back(static_cast<double>(pc.steps_sparse));
    per_seed += fmt(" [seed %ld auc %.0f/%.0f steps %ld/%ld]", seed, pc.auc_rlihf, pc.auc_sparse, pc.steps_rlihf,
                    pc.steps_sparse);
  }
  const double mr = median(steps_r), ms = median(steps_s);
  const double reduction = ms > 0 ? 1.0 - mr / ms : 0.0;
  const double cpu = training_seconds(out);
  const bool ok = auc_wins >= 4 && reduction >= 0.2 && cpu <= 7200.0;
  return {ok, fmt("AUC higher in %d/5 seeds, median steps-to-threshold %.0f vs %.0f (%.1f%% reduction), training "
                  "%.0f s CPU (%.0f s here);",
                  auc_wins, mr, ms, 100 * reduction, cpu, seconds_since(t0)) +
                  per_seed};
}

Verdict noisy_feedback_ordering() {
  const ExperimentConfig cfg = base_config(
      work_dir() / "noisy", {"sweep.alphas=[0.3,1.0]", "sweep.subjects=[\"inline\"]", "sweep.include_baseline=false",
                             "sweep.seeds=[0,1,2,3,4]", "feedback.observer.tpr=0.6", "feedback.observer.tnr=0.6",
                             "total_timesteps=200000"});
  ProtocolOptions opts;
  opts.workers = default_worker_count();
  const auto out = alpha_sweep(cfg, opts);
  if (!out.ok()) return {false, "failed cells: " + failures_of(out)};
  std::vector<double> low, high;
  for (long seed : cfg.sweep.seeds) {
    const auto a = read_final_eval(out.root / Cell{false, 0.3, kInlineSubject, seed}.relative_dir() / kFinalEvalFile);
    const auto b = read_final_eval(out.root / Cell{false, 1.0, kInlineSubject, seed}.relative_dir() / kFinalEvalFile);
    auto rate = [](const std::vector<FinalEvalRow>& rows) {
      double s = 0;
      for (const auto& r : rows) s += r.success;
      return s / static_cast<double>(rows.size());
    };
    low.push_back(rate(a));
    high.push_back(rate(b));
  }
  const double ml = median(low), mh = median(high);
  const double cpu = training_seconds(out);
  return {mh <= ml && cpu <= 7200.0,
          fmt("median final success alpha=1.0 %.3f vs alpha=0.3 %.3f, training %.0f s CPU", mh, ml, cpu)};
}

Verdict path_efficiency_checks() {
  std::vector<Point> arc;
  for (int i = 0; i <= 1000; ++i) {
    const double t = std::numbers::pi * i / 1000;
    arc.emplace_back(std::cos(t), std::sin(t), 0.0);
  }
  const double semi = path_efficiency(arc);
  std::vector<Point> line;
  for (int i = 0; i < 100; ++i) line.emplace_back(0.25 * i, 0.0, 0.0);
  const double straight = path_efficiency(line);
  Rng rng(2024);
  auto u = [&] { return 2.0 * uniform01(rng) - 1.0; };
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> path, moved;
    Point p = Point::Zero();
    for (int i = 0; i < 50; ++i) {
      p += Point(u(), u(), u());
      path.push_back(p);
    }
    const Eigen::Quaterniond q = Eigen::Quaterniond(u(), u(), u(), u()).normalized();
    const Eigen::Vector3d shift(100 * u(), 100 * u(), 100 * u());
    for (const auto& x : path) moved.push_back(q * x + shift);
    worst = std::max(worst, std::abs(path_efficiency(path) - path_efficiency(moved)));
  }
  const double err = std::abs(semi - 2.0 / std::numbers::pi);
  return {err < 1e-3 && straight == 1.0 && worst < 1e-9,
          fmt("semicircle %.6f (|err| %.2g), straight %.17g, rigid-motion max change %.2g", semi, err, straight, worst)};
}

Verdict decoder_calibration() {
  const auto t0 = Clock::now();
  const int n = 100000;
  std::string detail;
  bool ok = true;
  Rng rng(77);
  for (const auto& [tpr, tnr] : std::vector<std::pair<double, double>>{{0.8, 0.8}, {0.6, 0.9}, {0.9, 0.65}}) {
    const ObserverModel m{"x", tpr, tnr, 10.0};
    int tp = 0, tn = 0;
    for (int i = 0; i < n; ++i) {
      tp += simulate_decoder({true, ErrorCause::collision}, m, rng).p > 0.5;
      tn += simulate_decoder({false, ErrorCause::none}, m, rng).p < 0.5;
    }
    const double a = tp / double(n), b = tn / double(n);
    ok &= std::abs(a - tpr) <= 0.01 && std::abs(b - tnr) <= 0.01;
    detail += fmt("(%.2f,%.2f)->(%.4f,%.4f) ", tpr, tnr, a, b);
  }
  const ObserverModel chance{"c", 0.5, 0.5, 10.0};
  double sum = 0.0;
  for (int i = 0; i < 2 * n; ++i) sum += simulate_decoder({i % 2 == 0, ErrorCause::none}, chance, rng).p;
  const double mean = sum / (2 * n);
  const double secs = seconds_since(t0);
  ok &= std::abs(mean - 0.5) <= 0.01 && secs < 5.0;
  return {ok, detail + fmt("chance mean p %.4f, %.2f s", mean, secs)};
}

Verdict subject_bank() {
  const ExperimentConfig cfg = base_config(
      work_dir() / "subjects", {"alpha=0.3", "loso.subjects=all", "sweep.seeds=[0,1,2,3,4]", "total_timesteps=100000"});
  ProtocolOptions opts;
  opts.workers = default_worker_count();
  const auto out = loso_eval(cfg, opts);
  if (!out.ok()) return {false, "failed cells: " + failures_of(out)};
  const auto report = read_loso_report(out.root / "loso_report.csv");
  int better = 0;
  std::string ratios;
  for (const auto& r : report) {
    better += r.auc_ratio > 1.0;
    ratios += fmt(" %s:%.3f", r.subject.c_str(), r.auc_ratio);
  }
  const double cpu = training_seconds(out);
  return {report.size() == 12 && better >= 9 && cpu <= 6 * 3600.0,
          fmt("%d/%zu subjects with AUC ratio > 1, training %.0f s CPU; ratios", better, report.size(), cpu) + ratios};
}

// --- criterion 9: reproducible and resumable sweeps through the CLI ----------

const std::vector<std::string> kSmallSweep{
    "--set", "total_timesteps=3000",  "--set", "sac.warmup_steps=500", "--set", "sac.hidden_sizes=[32,32]",
    "--set", "sac.batch_size=64",     "--set", "eval.interval=1000",   "--set", "eval.episodes=3",
    "--set", "sweep.alphas=[0,0.3,0.5]", "--set", "sweep.seeds=[0,1]", "--set", "log_train_episodes=false"};

pid_t spawn_sweep(const fs::path& out) {
  std::vector<std::string> args{RLIHF_CLI, "sweep", "--workers", "1", "--set", "output_dir=" + out.string()};
  args.insert(args.end(), kSmallSweep.begin(), kSmallSweep.end());
  const pid_t pid = fork();
  if (pid == 0) {
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    if (std::freopen("/dev/null", "w", stdout) == nullptr || std::freopen("/dev/null", "w", stderr) == nullptr) _exit(126);
    execv(argv[0], argv.data());
    _exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every regular file below root except wall-clock statistics, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == kStatsFile) continue;
    files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return files;
}

Verdict reproducible_sweeps() {
  const fs::path dir = work_dir() / "reproducibility";
  fs::remove_all(dir);
  const auto t0 = Clock::now();
  const int ca = wait_exit(spawn_sweep(dir / "a"));
  const int cb = wait_exit(spawn_sweep(dir / "b"));
  if (ca != 0 || cb != 0) return {false, fmt("sweep exit codes %d and %d", ca, cb)};
  const auto a = snapshot(dir / "a" / "sweep");
  const auto b = snapshot(dir / "b" / "sweep");
  std::map<std::string, std::string> a_cfgless = a, b_cfgless = b;
  // frozen configs and the manifest name their own output directory
  for (auto* m : {&a_cfgless, &b_cfgless}) {
    std::erase_if(*m, [](const auto& kv) {
      return kv.first.ends_with(kConfigFile) || kv.first == "manifest.json";
    });
  }
  const bool repeat_ok = a_cfgless == b_cfgless && a.count("sweep_summary.csv");

  // kill the sweep after its first finished cell, then resume it
  const fs::path c = dir / "c";
  const pid_t pid = spawn_sweep(c);
  bool killed = false;
  for (int i = 0; i < 6000 && !killed; ++i) {
    int status = 0;
    if (waitpid(pid, &status, WNOHANG) == pid) break;  // finished before we could interrupt it
    for (const auto& e : fs::exists(c / "sweep") ? fs::recursive_directory_iterator(c / "sweep")
                                                 : fs::recursive_directory_iterator()) {
      if (e.path().filename() == kSummaryFile) {
        kill(pid, SIGKILL);
        wait_exit(pid);
        killed = true;
        break;
      }
    }
    if (!killed) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const bool partial = killed && !fs::exists(c / "sweep" / "sweep_summary.csv");
  const int cc = wait_exit(spawn_sweep(c));
  const bool resume_ok = cc == 0 && read_file(c / "sweep" / "sweep_summary.csv") == a.at("sweep_summary.csv");
  return {repeat_ok && partial && resume_ok,
          fmt("%zu files identical across repeated sweeps: %s; killed mid-sweep: %s; resumed summary identical: %s; "
              "%.1f s",
              a_cfgless.size(), repeat_ok ? "yes" : "no", partial ? "yes" : "no", resume_ok ? "yes" : "no",
              seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"reward shaping is exact on a 10^4 grid", shaping_grid},
      {"alpha = 0 matches disabled feedback byte for byte", zero_alpha_identity},
      {"analytic gradients match finite differences", gradient_checks},
      {"feedback accelerates learning (tpr = tnr = 0.8)", reward_acceleration},
      {"noisy feedback: alpha 1.0 does not beat alpha 0.3", noisy_feedback_ordering},
      {"path efficiency reference values and invariance", path_efficiency_checks},
      {"decoder calibration", decoder_calibration},
      {"twelve-subject bank beats sparse baselines", subject_bank},
      {"sweeps are reproducible and resumable", reproducible_sweeps},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  fs::create_directories(work_dir());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %d %s: %s: %s\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
