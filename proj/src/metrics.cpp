#include "rlihf/metrics.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rlihf/errors.hpp"

namespace rlihf {

double EpisodeRecord::env_return() const {
  return std::accumulate(per_step_r_env.begin(), per_step_r_env.end(), 0.0);
}

double EpisodeRecord::total_return() const {
  return std::accumulate(per_step_r_total.begin(), per_step_r_total.end(), 0.0);
}

nlohmann::json to_json(const EpisodeRecord& r, int workspace_dim) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : r.end_effector_path) {
    nlohmann::json pt = nlohmann::json::array();
    for (int d = 0; d < workspace_dim; ++d) pt.push_back(p[d]);
    path.push_back(std::move(pt));
  }
  return {{"kind", r.kind},
          {"episode_index", r.episode_index},
          {"global_step_at_start", r.global_step_at_start},
          {"success", r.success},
          {"collision_steps", r.collision_steps},
          {"end_effector_path", std::move(path)},
          {"per_step_r_env", r.per_step_r_env},
          {"per_step_r_total", r.per_step_r_total}};
}

EpisodeRecord episode_from_json(const nlohmann::json& j) {
  EpisodeRecord r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.episode_index = j.at("episode_index").get<long>();
    r.global_step_at_start = j.at("global_step_at_start").get<long>();
    r.success = j.at("success").get<bool>();
    r.collision_steps = j.at("collision_steps").get<int>();
    for (const auto& pt : j.at("end_effector_path")) {
      Point p = Point::Zero();
      for (std::size_t d = 0; d < pt.size() && d < 3; ++d) p[static_cast<Eigen::Index>(d)] = pt[d].get<double>();
      r.end_effector_path.push_back(p);
    }
    r.per_step_r_env = j.at("per_step_r_env").get<std::vector<double>>();
    r.per_step_r_total = j.at("per_step_r_total").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("episode record: ") + e.what());
  }
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw UsageError("cannot aggregate an empty list");
  const double n = static_cast<double>(values.size());
  // sorted summation keeps the result independent of input order
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
  std::sort(dev.begin(), dev.end());
  double ss = 0.0;
  for (double d : dev) ss += d;
  return {mean, std::sqrt(ss / n)};
}

double path_efficiency(std::span<const Point> path) {
  if (path.empty()) throw InputError("path_efficiency: path needs at least one point");
  for (const auto& p : path) {
    if (!p.allFinite()) throw InputError("path_efficiency: non-finite point");
  }
  double arc = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) arc += (path[i] - path[i - 1]).norm();
  if (arc <= 0.0) return 1.0;
  const double chord = (path.back() - path.front()).norm();
  return std::clamp(chord / arc, std::numeric_limits<double>::min(), 1.0);
}

namespace {

template <typename F>
MeanStd aggregate(std::span<const EpisodeRecord> records, F&& f) {
  if (records.empty()) throw UsageError("cannot aggregate an empty episode list");
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(f(r));
  return mean_std(v);
}

}  // namespace

MeanStd success_rate(std::span<const EpisodeRecord> records) {
  return aggregate(records, [](const EpisodeRecord& r) { return r.success ? 1.0 : 0.0; });
}

MeanStd mean_collision(std::span<const EpisodeRecord> records) {
  return aggregate(records, [](const EpisodeRecord& r) { return static_cast<double>(r.collision_steps); });
}

MeanStd path_efficiency_stats(std::span<const EpisodeRecord> records) {
  return aggregate(records, [](const EpisodeRecord& r) { return path_efficiency(r.end_effector_path); });
}

ReturnCurve build_return_curve(std::span<const EvalLog> logs) {
  ReturnCurve curve;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (i > 0 && logs[i].step <= logs[i - 1].step) {
      throw InputError("build_return_curve: steps must be strictly increasing");
    }
    curve.push_back({logs[i].step, mean_std(logs[i].returns).mean});
  }
  return curve;
}

double area_under_curve(const ReturnCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double width = static_cast<double>(curve[i].step - curve[i - 1].step);
    area += 0.5 * width * (curve[i].value + curve[i - 1].value);
  }
  return area;
}

ReturnCurve smooth_curve(const ReturnCurve& curve, int window) {
  if (window < 1) throw InputError("smoothing window must be >= 1");
  ReturnCurve out;
  out.reserve(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const std::size_t first = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += curve[j].value;
    out.push_back({curve[i].step, sum / static_cast<double>(i - first + 1)});
  }
  return out;
}

long steps_to_threshold(const ReturnCurve& curve, double threshold, int window, long censored) {
  for (const auto& pt : smooth_curve(curve, window)) {
    if (pt.value >= threshold) return pt.step;
  }
  return censored;
}

double final_value(const ReturnCurve& curve, int window) {
  if (curve.empty()) throw UsageError("final_value: empty curve");
  return smooth_curve(curve, window).back().value;
}

RunSummary summarize(std::span<const EpisodeRecord> final_eval_episodes, const ReturnCurve& curve) {
  RunSummary s;
  s.success_rate = success_rate(final_eval_episodes);
  s.path_efficiency = path_efficiency_stats(final_eval_episodes);
  s.mean_collision = mean_collision(final_eval_episodes);
  s.return_curve = curve;
  return s;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string to_csv_line(const SummaryRow& r) {
  std::ostringstream os;
  os << r.method << ',' << format_number(r.alpha) << ',' << r.subject << ',' << format_number(r.success_rate.mean)
     << ',' << format_number(r.success_rate.std) << ',' << format_number(r.path_efficiency.mean) << ','
     << format_number(r.path_efficiency.std) << ',' << format_number(r.mean_collision.mean) << ','
     << format_number(r.mean_collision.std);
  return os.str();
}

bool summary_order(const SummaryRow& a, const SummaryRow& b) {
  if (a.method != b.method) return a.method > b.method;  // "sparse" before "rlihf"
  if (a.alpha != b.alpha) return a.alpha < b.alpha;
  return a.subject < b.subject;
}

void write_summary_table(const std::filesystem::path& path, std::vector<SummaryRow> rows) {
  std::sort(rows.begin(), rows.end(), summary_order);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp);
    out << kSummaryHeader << '\n';
    for (const auto& r : rows) out << to_csv_line(r) << '\n';
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

std::vector<SummaryRow> read_summary_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader) {
    throw FormatError(path.string() + ": unexpected summary header");
  }
  std::vector<SummaryRow> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw FormatError(path.string() + ": row " + std::to_string(row_no) + ": expected 9 columns");
    try {
      rows.push_back({f[0], std::stod(f[1]), f[2], {std::stod(f[3]), std::stod(f[4])},
                      {std::stod(f[5]), std::stod(f[6])}, {std::stod(f[7]), std::stod(f[8])}});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": row " + std::to_string(row_no) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace rlihf
