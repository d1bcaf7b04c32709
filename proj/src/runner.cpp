#include "rlihf/runner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "rlihf/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rlihf {

namespace {

constexpr const char* kManifestFile = "manifest.json";

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(file.string() + ": row " + std::to_string(row) + ": bad number '" + s + "'");
  }
}

std::string subject_label(const ExperimentConfig& cfg) {
  switch (cfg.feedback.source) {
    case FeedbackSource::disabled: return kNoSubject;
    case FeedbackSource::stream: return kStreamSubject;
    case FeedbackSource::simulated: break;
  }
  return cfg.feedback.subject.empty() ? std::string(kInlineSubject) : cfg.feedback.subject;
}

Cell cell_of(const ExperimentConfig& cfg) {
  Cell c;
  c.sparse = cfg.feedback.source == FeedbackSource::disabled;
  c.alpha = c.sparse ? 0.0 : cfg.alpha;
  c.subject = subject_label(cfg);
  c.seed = cfg.seed;
  return c;
}

std::unique_ptr<FeedbackChannel> make_channel(const ExperimentConfig& cfg, std::uint64_t decoder_seed) {
  switch (cfg.feedback.source) {
    case FeedbackSource::disabled: return nullptr;
    case FeedbackSource::stream:
      return std::make_unique<ReplayedStream>(load_probability_stream(cfg.feedback.stream));
    case FeedbackSource::simulated: break;
  }
  ObserverModel model = cfg.feedback.observer;
  if (!cfg.feedback.subject.empty()) model = find_subject(resolve_observer_bank(cfg), cfg.feedback.subject);
  return std::make_unique<SimulatedObserver>(model, decoder_seed);
}

StreamSeeds seeds_of(const ExperimentConfig& cfg) {
  const Cell c = cell_of(cfg);
  return StreamSeeds::derive(cfg.master_seed, static_cast<std::uint64_t>(cfg.seed), decoder_salt(c.alpha, c.subject));
}

TrainingOptions options_of(const ExperimentConfig& cfg) {
  TrainingOptions o;
  o.total_timesteps = cfg.total_timesteps;
  o.alpha = cfg.alpha;
  o.progress_tolerance = cfg.feedback.progress_tolerance;
  o.eval_interval = cfg.eval.interval;
  o.eval_episodes = cfg.eval.episodes;
  return o;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string s = "step,eval_return_mean,train_return\n";
  for (const auto& r : rows) {
    s += std::to_string(r.step) + ',' + format_number(r.eval_return_mean) + ',' + format_number(r.train_return) + '\n';
  }
  return s;
}

std::string final_eval_csv(std::span<const EpisodeRecord> episodes) {
  std::string s = "success,path_efficiency,collision_steps\n";
  for (const auto& e : episodes) {
    s += std::string(e.success ? "1" : "0") + ',' + format_number(path_efficiency(e.end_effector_path)) + ',' +
         std::to_string(e.collision_steps) + '\n';
  }
  return s;
}

SummaryRow row_of(const Cell& cell, const RunSummary& s) {
  SummaryRow r;
  r.method = cell.method();
  r.alpha = cell.alpha;
  r.subject = cell.subject;
  r.success_rate = s.success_rate;
  r.path_efficiency = s.path_efficiency;
  r.mean_collision = s.mean_collision;
  return r;
}

RunResult load_completed(const fs::path& dir) {
  RunResult r;
  r.skipped = true;
  r.curve = read_curve(dir / kCurveFile);
  const auto rows = read_summary_table(dir / kSummaryFile);
  if (rows.size() != 1) throw FormatError((dir / kSummaryFile).string() + ": expected one row");
  r.summary.success_rate = rows[0].success_rate;
  r.summary.path_efficiency = rows[0].path_efficiency;
  r.summary.mean_collision = rows[0].mean_collision;
  r.summary.return_curve = eval_curve(r.curve);
  const json stats = json::parse(read_text(dir / kStatsFile));
  r.gradient_updates = stats.at("gradient_updates").get<std::uint64_t>();
  return r;
}

// Config fields that determine a run's results; protocol bookkeeping is excluded
// so that growing a sweep reuses its finished cells.
json run_identity(json cfg) {
  for (const char* k : {"output_dir", "sweep", "loso"}) cfg.erase(k);
  return cfg;
}

void check_same_run(const fs::path& dir, const ExperimentConfig& cfg) {
  json stored;
  try {
    stored = json::parse(read_text(dir / kConfigFile));
  } catch (const json::exception& e) {
    throw FormatError((dir / kConfigFile).string() + ": " + e.what());
  }
  if (run_identity(stored) != run_identity(to_json(cfg))) {
    throw ConfigError(dir.string() + ": holds a finished run with a different config (use --force to replace it)");
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json cell_json(const Cell& c) {
  return {{"method", c.method()}, {"alpha", c.alpha}, {"subject", c.subject}, {"seed", c.seed},
          {"dir", c.relative_dir().generic_string()}};
}

Cell cell_from_json(const json& j) {
  Cell c;
  c.sparse = j.at("method").get<std::string>() == "sparse";
  c.alpha = j.at("alpha").get<double>();
  c.subject = j.at("subject").get<std::string>();
  c.seed = j.at("seed").get<long>();
  return c;
}

struct Manifest {
  std::string protocol;
  json config;
  std::vector<Cell> cells;
  std::vector<ObserverModel> subjects;
};

Manifest read_manifest(const fs::path& root) {
  const fs::path path = root / kManifestFile;
  if (!fs::exists(path)) throw IoError("no " + std::string(kManifestFile) + " in " + root.string());
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Manifest m;
  m.protocol = j.at("protocol").get<std::string>();
  m.config = j.at("config");
  for (const auto& c : j.at("cells")) m.cells.push_back(cell_from_json(c));
  for (const auto& s : j.value("subjects", json::array())) {
    m.subjects.push_back({s.at("subject_id").get<std::string>(), s.at("tpr").get<double>(), s.at("tnr").get<double>(),
                          s.at("sharpness").get<double>()});
  }
  return m;
}

void write_manifest(const fs::path& root, const std::string& protocol, const ExperimentConfig& cfg,
                    const std::vector<Cell>& cells, const std::vector<ObserverModel>& subjects) {
  json j;
  j["protocol"] = protocol;
  j["config"] = to_json(cfg);
  j["cells"] = json::array();
  for (const auto& c : cells) j["cells"].push_back(cell_json(c));
  j["subjects"] = json::array();
  for (const auto& s : subjects) {
    j["subjects"].push_back({{"subject_id", s.subject_id}, {"tpr", s.tpr}, {"tnr", s.tnr}, {"sharpness", s.sharpness}});
  }
  fs::create_directories(root);
  write_atomic(root / kManifestFile, j.dump(2) + "\n");
}

ProtocolOutcome run_cells(const ExperimentConfig& base, const fs::path& root, const std::vector<Cell>& cells,
                          const ProtocolOptions& opts) {
  ProtocolOutcome out;
  out.root = root;
  out.cells = cells;

  std::vector<std::size_t> order = opts.schedule;
  if (order.empty()) {
    order.resize(cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  }
  if (order.size() != cells.size()) throw UsageError("schedule must list every cell once");

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<std::string> failures;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= order.size()) return;
      const Cell& cell = cells.at(order[k]);
      try {
        train_single(cell_config(base, cell), root / cell.relative_dir(), opts.force);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failures.push_back(cell.relative_dir().generic_string() + ": " + e.what());
      }
    }
  };
  const int n = std::max(1, std::min<int>(opts.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(failures.begin(), failures.end());
  out.failures = std::move(failures);
  aggregate_protocol(root);
  return out;
}

std::vector<std::string> subjects_for(std::vector<std::string> ids, const std::vector<ObserverModel>& bank) {
  if (ids.empty()) {
    for (const auto& s : bank) ids.push_back(s.subject_id);
  }
  for (const auto& id : ids) {
    if (id != kInlineSubject) find_subject(bank, id);
  }
  return ids;
}

struct Group {
  std::string method;
  double alpha;
  std::string subject;
  bool operator<(const Group& o) const {
    SummaryRow a{method, alpha, subject, {}, {}, {}};
    SummaryRow b{o.method, o.alpha, o.subject, {}, {}, {}};
    return summary_order(a, b);
  }
};

Group group_of(const Cell& c) { return {c.method(), c.alpha, c.subject}; }

// Completed cells grouped by (method, alpha, subject), seeds ascending.
std::map<Group, std::vector<Cell>> completed_groups(const fs::path& root, const std::vector<Cell>& cells,
                                                    std::vector<std::string>* missing) {
  std::vector<Cell> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  std::map<Group, std::vector<Cell>> groups;
  for (const auto& c : sorted) {
    if (run_completed(root / c.relative_dir())) {
      groups[group_of(c)].push_back(c);
    } else if (missing) {
      missing->push_back(c.relative_dir().generic_string());
    }
  }
  return groups;
}

SummaryRow pooled_row(const fs::path& root, const Group& g, const std::vector<Cell>& cells) {
  std::vector<double> success, eff, coll;
  for (const auto& c : cells) {
    for (const auto& r : read_final_eval(root / c.relative_dir() / kFinalEvalFile)) {
      success.push_back(r.success ? 1.0 : 0.0);
      eff.push_back(r.path_efficiency);
      coll.push_back(static_cast<double>(r.collision_steps));
    }
  }
  SummaryRow row;
  row.method = g.method;
  row.alpha = g.alpha;
  row.subject = g.subject;
  row.success_rate = mean_std(success);
  row.path_efficiency = mean_std(eff);
  row.mean_collision = mean_std(coll);
  return row;
}

void aggregate_sweep(const fs::path& root, const Manifest& m) {
  const auto groups = completed_groups(root, m.cells, nullptr);
  std::vector<SummaryRow> rows;
  std::string auc = "method,alpha,subject,auc_mean,auc_std,final_return_mean,final_return_std,seeds\n";
  for (const auto& [g, cells] : groups) {
    rows.push_back(pooled_row(root, g, cells));
    std::vector<double> aucs, finals;
    for (const auto& c : cells) {
      const ReturnCurve curve = eval_curve(read_curve(root / c.relative_dir() / kCurveFile));
      aucs.push_back(area_under_curve(curve));
      finals.push_back(final_value(curve, kSmoothingWindow));
    }
    const MeanStd a = mean_std(aucs);
    const MeanStd f = mean_std(finals);
    auc += g.method + ',' + format_number(g.alpha) + ',' + g.subject + ',' + format_number(a.mean) + ',' +
           format_number(a.std) + ',' + format_number(f.mean) + ',' + format_number(f.std) + ',' +
           std::to_string(cells.size()) + '\n';
  }
  write_summary_table(root / "sweep_summary.csv", rows);
  write_atomic(root / "sweep_auc.csv", auc);
}

std::vector<PairedComparison> paired_for_subject(const fs::path& root, const std::map<Group, std::vector<Cell>>& groups,
                                                 const Group& g, long censored) {
  std::vector<PairedComparison> out;
  const auto it = groups.find(g);
  if (it == groups.end()) return out;
  std::map<long, ReturnCurve> sparse;
  for (const auto& [sg, cells] : groups) {
    if (sg.method != "sparse") continue;
    for (const auto& c : cells) sparse[c.seed] = eval_curve(read_curve(root / c.relative_dir() / kCurveFile));
  }
  for (const auto& c : it->second) {
    const auto s = sparse.find(c.seed);
    if (s == sparse.end()) continue;
    out.push_back(compare_paired(c.seed, eval_curve(read_curve(root / c.relative_dir() / kCurveFile)), s->second,
                                 censored));
  }
  return out;
}

void aggregate_loso(const fs::path& root, const Manifest& m) {
  const auto groups = completed_groups(root, m.cells, nullptr);
  const long censored = m.config.at("total_timesteps").get<long>();
  std::vector<SummaryRow> rows;
  for (const auto& [g, cells] : groups) rows.push_back(pooled_row(root, g, cells));
  write_summary_table(root / "loso_summary.csv", rows);

  const double alpha = m.config.at("alpha").get<double>();
  std::string report =
      "subject,tpr,tnr,auc_rlihf,auc_sparse,auc_ratio,steps_rlihf_median,steps_sparse_median,steps_ratio,"
      "seeds_faster,seeds\n";
  std::string paired = "subject,seed,auc_rlihf,auc_sparse,threshold,steps_rlihf,steps_sparse\n";
  for (const auto& subj : m.subjects) {
    const auto pairs = paired_for_subject(root, groups, {"rlihf", alpha, subj.subject_id}, censored);
    if (pairs.empty()) continue;
    std::vector<double> ar, as, sr, ss;
    int faster = 0;
    for (const auto& p : pairs) {
      ar.push_back(p.auc_rlihf);
      as.push_back(p.auc_sparse);
      sr.push_back(static_cast<double>(p.steps_rlihf));
      ss.push_back(static_cast<double>(p.steps_sparse));
      if (p.steps_rlihf < p.steps_sparse) ++faster;
      paired += subj.subject_id + ',' + std::to_string(p.seed) + ',' + format_number(p.auc_rlihf) + ',' +
                format_number(p.auc_sparse) + ',' + format_number(p.threshold) + ',' + std::to_string(p.steps_rlihf) +
                ',' + std::to_string(p.steps_sparse) + '\n';
    }
    const double mr = mean_std(ar).mean, ms = mean_std(as).mean;
    const double qr = median(sr), qs = median(ss);
    report += subj.subject_id + ',' + format_number(subj.tpr) + ',' + format_number(subj.tnr) + ',' +
              format_number(mr) + ',' + format_number(ms) + ',' + format_number(ms != 0.0 ? mr / ms : 0.0) + ',' +
              format_number(qr) + ',' + format_number(qs) + ',' + format_number(qs != 0.0 ? qr / qs : 0.0) + ',' +
              std::to_string(faster) + ',' + std::to_string(pairs.size()) + '\n';
  }
  write_atomic(root / "loso_report.csv", report);
  write_atomic(root / "loso_paired.csv", paired);
}

}  // namespace

std::string Cell::alpha_label() const { return sparse ? "sparse" : format_number(alpha); }

fs::path Cell::relative_dir() const { return fs::path(alpha_label()) / subject / std::to_string(seed); }

bool Cell::operator<(const Cell& o) const {
  SummaryRow a{method(), alpha, subject, {}, {}, {}};
  SummaryRow b{o.method(), o.alpha, o.subject, {}, {}, {}};
  if (summary_order(a, b)) return true;
  if (summary_order(b, a)) return false;
  return seed < o.seed;
}

std::uint64_t decoder_salt(double alpha, const std::string& subject) {
  return derive_seed(hash_name(subject), std::bit_cast<std::uint64_t>(alpha + 0.0));
}

ExperimentConfig cell_config(const ExperimentConfig& base, const Cell& cell) {
  ExperimentConfig cfg = base;
  cfg.seed = cell.seed;
  if (cell.sparse) {
    // feedback settings cannot affect a disabled channel; keep them canonical
    cfg.alpha = 0.0;
    cfg.feedback = FeedbackConfig{};
    cfg.feedback.source = FeedbackSource::disabled;
  } else {
    cfg.alpha = cell.alpha;
    const bool stream = cell.subject == kStreamSubject;
    cfg.feedback.source = stream ? FeedbackSource::stream : FeedbackSource::simulated;
    cfg.feedback.subject = stream || cell.subject == kInlineSubject ? std::string() : cell.subject;
  }
  return cfg;
}

fs::path train_run_dir(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir) / "train" / cell_of(cfg).relative_dir(); }

bool run_completed(const fs::path& run_dir) { return fs::exists(run_dir / kSummaryFile); }

RunResult train_single(const ExperimentConfig& cfg, const fs::path& run_dir, bool force) {
  cfg.validate();
  if (!force && run_completed(run_dir)) {
    check_same_run(run_dir, cfg);
    return load_completed(run_dir);
  }

  fs::create_directories(run_dir);
  fs::remove(run_dir / kSummaryFile);
  write_atomic(run_dir / kConfigFile, to_json(cfg).dump(2) + "\n");

  const StreamSeeds seeds = seeds_of(cfg);
  Trainer trainer(cfg.scene, cfg.sac, options_of(cfg), make_channel(cfg, seeds.decoder), seeds);
  const int dim = cfg.scene.arm.workspace_dim();

  const fs::path episodes_path = run_dir / kEpisodesFile;
  std::ofstream episodes(episodes_path, std::ios::trunc);
  if (!episodes) throw IoError("cannot write " + episodes_path.string());
  const auto start = std::chrono::steady_clock::now();
  long train_episodes = 0;
  trainer.run([&](const EpisodeRecord& e) {
    if (e.kind == "train") ++train_episodes;
    if (e.kind == "eval" || cfg.log_train_episodes) episodes << to_json(e, dim).dump() << '\n';
  });
  episodes.close();
  if (!episodes) throw IoError("failed writing " + episodes_path.string());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto& evals = trainer.eval_episodes();
  const std::size_t keep = std::min<std::size_t>(evals.size(), static_cast<std::size_t>(cfg.eval.summary_episodes));
  const std::span<const EpisodeRecord> final_eps(evals.data() + (evals.size() - keep), keep);

  RunResult result;
  result.curve = trainer.curve();
  result.summary = summarize(final_eps, eval_curve(result.curve));
  result.gradient_updates = trainer.gradient_updates();

  write_atomic(run_dir / kCurveFile, curve_csv(result.curve));
  write_atomic(run_dir / kFinalEvalFile, final_eval_csv(final_eps));
  trainer.agent().save(run_dir / kCheckpointFile);
  json stats = {{"gradient_updates", result.gradient_updates},
                {"env_steps", trainer.global_step()},
                {"train_episodes", train_episodes},
                {"auc", area_under_curve(result.summary.return_curve)},
                {"wall_seconds", seconds}};
  write_atomic(run_dir / kStatsFile, stats.dump(2) + "\n");
  // completion marker, written last
  write_summary_table(run_dir / kSummaryFile, {row_of(cell_of(cfg), result.summary)});
  return result;
}

std::vector<CurveRow> read_curve(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "step,eval_return_mean,train_return") {
    throw FormatError(path.string() + ": unexpected header");
  }
  std::vector<CurveRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw FormatError(path.string() + ": row " + std::to_string(n) + ": expected 3 fields");
    rows.push_back({static_cast<long>(parse_double(f[0], path, n)), parse_double(f[1], path, n),
                    parse_double(f[2], path, n)});
  }
  return rows;
}

std::vector<FinalEvalRow> read_final_eval(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "success,path_efficiency,collision_steps") {
    throw FormatError(path.string() + ": unexpected header");
  }
  std::vector<FinalEvalRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw FormatError(path.string() + ": row " + std::to_string(n) + ": expected 3 fields");
    rows.push_back({parse_double(f[0], path, n) != 0.0, parse_double(f[1], path, n),
                    static_cast<int>(parse_double(f[2], path, n))});
  }
  return rows;
}

ReturnCurve eval_curve(const std::vector<CurveRow>& rows) {
  ReturnCurve c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back({r.step, r.eval_return_mean});
  return c;
}

PairedComparison compare_paired(long seed, const ReturnCurve& rlihf, const ReturnCurve& sparse, long censored) {
  PairedComparison p;
  p.seed = seed;
  p.auc_rlihf = area_under_curve(rlihf);
  p.auc_sparse = area_under_curve(sparse);
  p.threshold = kThresholdFraction * final_value(sparse, kSmoothingWindow);
  p.steps_rlihf = steps_to_threshold(rlihf, p.threshold, kSmoothingWindow, censored);
  p.steps_sparse = steps_to_threshold(sparse, p.threshold, kSmoothingWindow, censored);
  return p;
}

std::vector<Cell> sweep_cells(const ExperimentConfig& cfg) {
  const auto bank = resolve_observer_bank(cfg);
  const auto subjects = cfg.feedback.source == FeedbackSource::stream ? std::vector<std::string>{kStreamSubject}
                                                                      : subjects_for(cfg.sweep.subjects, bank);
  std::vector<Cell> cells;
  bool have_baseline = false;
  for (double a : cfg.sweep.alphas) {
    for (long seed : cfg.sweep.seeds) {
      if (a == 0.0 && cfg.sweep.include_baseline) {
        cells.push_back({true, 0.0, kNoSubject, seed});
        have_baseline = true;
        continue;
      }
      for (const auto& s : subjects) cells.push_back({false, a, s, seed});
    }
  }
  if (cfg.sweep.include_baseline && !have_baseline) {
    for (long seed : cfg.sweep.seeds) cells.push_back({true, 0.0, kNoSubject, seed});
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

std::vector<Cell> loso_cells(const ExperimentConfig& cfg) {
  const auto bank = resolve_observer_bank(cfg);
  const auto subjects = subjects_for(cfg.loso.subjects, bank);
  std::vector<Cell> cells;
  for (long seed : cfg.sweep.seeds) {
    cells.push_back({true, 0.0, kNoSubject, seed});
    for (const auto& s : subjects) cells.push_back({false, cfg.alpha, s, seed});
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

ProtocolOutcome alpha_sweep(const ExperimentConfig& cfg, const ProtocolOptions& opts) {
  cfg.validate();
  const auto cells = sweep_cells(cfg);
  const fs::path root = fs::path(cfg.output_dir) / "sweep";
  std::vector<ObserverModel> subjects;
  const auto bank = resolve_observer_bank(cfg);
  for (const auto& id : cfg.feedback.source == FeedbackSource::stream ? std::vector<std::string>{}
                                                                       : subjects_for(cfg.sweep.subjects, bank)) {
    subjects.push_back(id == kInlineSubject ? cfg.feedback.observer : find_subject(bank, id));
    if (id == kInlineSubject) subjects.back().subject_id = kInlineSubject;
  }
  write_manifest(root, "sweep", cfg, cells, subjects);
  return run_cells(cfg, root, cells, opts);
}

ProtocolOutcome loso_eval(const ExperimentConfig& cfg, const ProtocolOptions& opts) {
  cfg.validate();
  const auto bank = resolve_observer_bank(cfg);
  std::vector<ObserverModel> subjects;
  for (const auto& id : subjects_for(cfg.loso.subjects, bank)) {
    if (id == kInlineSubject) throw ConfigError("loso.subjects: '" + id + "' is not a bank subject");
    subjects.push_back(find_subject(bank, id));
  }
  const auto cells = loso_cells(cfg);
  const fs::path root = fs::path(cfg.output_dir) / "loso";
  write_manifest(root, "loso", cfg, cells, subjects);
  return run_cells(cfg, root, cells, opts);
}

void aggregate_protocol(const fs::path& root) {
  const Manifest m = read_manifest(root);
  if (m.protocol == "sweep") {
    aggregate_sweep(root, m);
  } else if (m.protocol == "loso") {
    aggregate_loso(root, m);
  } else {
    throw FormatError((root / kManifestFile).string() + ": unknown protocol '" + m.protocol + "'");
  }
}

ExportOutcome export_plots(const fs::path& root) {
  const Manifest m = read_manifest(root);
  ExportOutcome out;
  const auto groups = completed_groups(root, m.cells, &out.missing);

  std::map<Group, std::vector<std::vector<CurveRow>>> curves;
  for (const auto& [g, cells] : groups) {
    for (const auto& c : cells) curves[g].push_back(read_curve(root / c.relative_dir() / kCurveFile));
  }

  // mean and population std over seeds, per checkpoint
  auto band = [](const std::vector<std::vector<CurveRow>>& runs, std::size_t k) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r[k].eval_return_mean);
    return mean_std(v);
  };
  auto checkpoints = [](const std::vector<std::vector<CurveRow>>& runs) {
    std::size_t n = runs.front().size();
    for (const auto& r : runs) n = std::min(n, r.size());
    return n;
  };

  std::string alpha_csv = "method,alpha,subject,step,eval_return_mean,eval_return_std,seeds\n";
  for (const auto& [g, runs] : curves) {
    for (std::size_t k = 0; k < checkpoints(runs); ++k) {
      const MeanStd b = band(runs, k);
      alpha_csv += g.method + ',' + format_number(g.alpha) + ',' + g.subject + ',' + std::to_string(runs.front()[k].step) +
              ',' + format_number(b.mean) + ',' + format_number(b.std) + ',' + std::to_string(runs.size()) + '\n';
    }
  }
  write_atomic(root / "alpha_curves.csv", alpha_csv);
  out.written.push_back(root / "alpha_curves.csv");

  if (m.protocol == "loso") {
    const Group sparse{"sparse", 0.0, kNoSubject};
    const double alpha = m.config.at("alpha").get<double>();
    const auto s = curves.find(sparse);
    for (const auto& subj : m.subjects) {
      const auto r = curves.find({"rlihf", alpha, subj.subject_id});
      if (r == curves.end() || s == curves.end()) continue;
      std::string subject_csv = "step,rlihf_mean,rlihf_std,sparse_mean,sparse_std,seeds_rlihf,seeds_sparse\n";
      const std::size_t n = std::min(checkpoints(r->second), checkpoints(s->second));
      for (std::size_t k = 0; k < n; ++k) {
        const MeanStd a = band(r->second, k), b = band(s->second, k);
        subject_csv += std::to_string(r->second.front()[k].step) + ',' + format_number(a.mean) + ',' + format_number(a.std) +
                ',' + format_number(b.mean) + ',' + format_number(b.std) + ',' + std::to_string(r->second.size()) +
                ',' + std::to_string(s->second.size()) + '\n';
      }
      const fs::path p = root / ("subject_" + subj.subject_id + ".csv");
      write_atomic(p, subject_csv);
      out.written.push_back(p);
    }
    aggregate_loso(root, m);
    out.written.push_back(root / "loso_paired.csv");
  }
  return out;
}

std::vector<LosoReportRow> read_loso_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<LosoReportRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw FormatError(path.string() + ": row " + std::to_string(n) + ": expected 11 fields");
    LosoReportRow r;
    r.subject = f[0];
    r.tpr = parse_double(f[1], path, n);
    r.tnr = parse_double(f[2], path, n);
    r.auc_rlihf = parse_double(f[3], path, n);
    r.auc_sparse = parse_double(f[4], path, n);
    r.auc_ratio = parse_double(f[5], path, n);
    r.steps_rlihf_median = parse_double(f[6], path, n);
    r.steps_sparse_median = parse_double(f[7], path, n);
    r.steps_ratio = parse_double(f[8], path, n);
    r.seeds_faster = static_cast<int>(parse_double(f[9], path, n));
    r.seeds = static_cast<int>(parse_double(f[10], path, n));
    rows.push_back(r);
  }
  return rows;
}

EvalReport evaluate_run(const fs::path& run_dir, int episodes) {
  if (episodes < 1) throw UsageError("episodes must be positive");
  if (!fs::exists(run_dir / kCheckpointFile)) throw IoError("no checkpoint in " + run_dir.string());
  json doc;
  try {
    doc = json::parse(read_text(run_dir / kConfigFile));
  } catch (const json::exception& e) {
    throw FormatError((run_dir / kConfigFile).string() + ": " + e.what());
  }
  ExperimentConfig cfg = resolve_config(doc);
  cfg.eval.episodes = episodes;
  const StreamSeeds seeds = seeds_of(cfg);
  Trainer trainer(cfg.scene, cfg.sac, options_of(cfg), nullptr, seeds);
  trainer.agent().load(run_dir / kCheckpointFile);
  const auto eps = trainer.evaluate();
  EvalReport report;
  for (const auto& e : eps) report.returns.push_back(e.env_return());
  report.summary = summarize(eps, {});
  return report;
}

int default_worker_count() {
  if (const char* env = std::getenv("RLIHF_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

}  // namespace rlihf
