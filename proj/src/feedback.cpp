#include "rlihf/feedback.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rlihf/errors.hpp"

namespace rlihf {

void ObserverModel::validate() const {
  const std::string who = "observer '" + subject_id + "'";
  if (!(tpr >= 0.5 && tpr <= 1.0)) throw ConfigError(who + ".tpr: must lie in [0.5, 1]");
  if (!(tnr >= 0.5 && tnr <= 1.0)) throw ConfigError(who + ".tnr: must lie in [0.5, 1]");
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
    throw ConfigError(who + ".sharpness: must be positive");
  }
}

const char* to_string(ErrorCause cause) {
  switch (cause) {
    case ErrorCause::none: return "none";
    case ErrorCause::moved_away_from_subgoal: return "moved_away_from_subgoal";
    case ErrorCause::collision: return "collision";
  }
  return "none";
}

ErrorJudgment judge_transition(double prev_distance_to_subgoal, const StepOutcome& curr, double tolerance) {
  if (curr.collided) return {true, ErrorCause::collision};
  if (curr.distance_to_subgoal - prev_distance_to_subgoal > tolerance) {
    return {true, ErrorCause::moved_away_from_subgoal};
  }
  return {false, ErrorCause::none};
}

namespace {

double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double sum = x + y;
  if (!(sum > 0.0)) return a >= b ? 1.0 : 0.0;
  return x / sum;
}

}  // namespace

FeedbackSample simulate_decoder(const ErrorJudgment& judgment, const ObserverModel& model, Rng& rng) {
  const double hit_rate = judgment.is_error ? model.tpr : model.tnr;
  const bool agrees = uniform01(rng) < hit_rate;
  // high = the draw should report "error" (p > 0.5)
  const bool high = judgment.is_error == agrees;
  const double mean = high ? kConfidentErrorMean : 1.0 - kConfidentErrorMean;
  double p = sample_beta(model.sharpness * mean, model.sharpness * (1.0 - mean), rng);
  if (high && p < 0.5) p = 1.0 - p;
  if (!high && p > 0.5) p = 1.0 - p;
  return {p, 0.5 - p};
}

ShapedReward shape_reward(double r_env, double p, double alpha) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("shape_reward: p must lie in [0, 1]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InputError("shape_reward: alpha must be >= 0");
  if (!std::isfinite(r_env)) throw InputError("shape_reward: r_env must be finite");
  ShapedReward out;
  out.r_env = r_env;
  out.p = p;
  out.r_hf = 0.5 - p;
  out.alpha = alpha;
  out.r_total = r_env + alpha * out.r_hf;
  return out;
}

std::vector<double> load_probability_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open probability stream " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file, expected header 'step,p'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "step,p") throw FormatError(path.string() + ": row 0: expected header 'step,p'");
  std::vector<double> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ": row " + std::to_string(row);
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(where + ": expected 'step,p'");
    long long step = 0;
    double p = 0.0;
    try {
      std::size_t used = 0;
      step = std::stoll(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("step");
      const auto rest = line.substr(comma + 1);
      p = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("p");
    } catch (const std::exception&) {
      throw FormatError(where + ": malformed row '" + line + "'");
    }
    if (step != static_cast<long long>(out.size())) {
      throw FormatError(where + ": step must increase by one from 0 (got " + std::to_string(step) + ")");
    }
    if (!(p >= 0.0 && p <= 1.0)) throw FormatError(where + ": p=" + line.substr(comma + 1) + " outside [0, 1]");
    out.push_back(p);
  }
  return out;
}

void write_probability_stream(const std::filesystem::path& path, std::span<const double> probabilities) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write probability stream " + path.string());
  out << "step,p\n";
  char buf[64];
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, probabilities[i]);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ObserverModel> load_observer_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open observer bank " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!doc.contains("subjects") || !doc["subjects"].is_array()) {
    throw FormatError(path.string() + ": expected a 'subjects' array");
  }
  std::vector<ObserverModel> bank;
  for (std::size_t i = 0; i < doc["subjects"].size(); ++i) {
    const auto& s = doc["subjects"][i];
    ObserverModel m;
    try {
      m.subject_id = s.at("subject_id").get<std::string>();
      m.tpr = s.at("tpr").get<double>();
      m.tnr = s.at("tnr").get<double>();
      m.sharpness = s.value("sharpness", 10.0);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": subjects[" + std::to_string(i) + "]: " + e.what());
    }
    m.validate();
    for (const auto& other : bank) {
      if (other.subject_id == m.subject_id) throw ConfigError("duplicate subject id '" + m.subject_id + "'");
    }
    bank.push_back(std::move(m));
  }
  return bank;
}

void write_observer_bank(const std::filesystem::path& path, const std::vector<ObserverModel>& bank) {
  nlohmann::json doc;
  doc["subjects"] = nlohmann::json::array();
  for (const auto& m : bank) {
    doc["subjects"].push_back(
        {{"subject_id", m.subject_id}, {"tpr", m.tpr}, {"tnr", m.tnr}, {"sharpness", m.sharpness}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write observer bank " + path.string());
  out << doc.dump(2) << "\n";
}

std::vector<ObserverModel> default_observer_bank() {
  std::vector<ObserverModel> bank;
  for (int i = 0; i < 12; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "S%02d", i + 1);
    const double acc = 0.60 + 0.30 * i / 11.0;
    bank.push_back({id, acc, acc, 10.0});
  }
  return bank;
}

const ObserverModel& find_subject(const std::vector<ObserverModel>& bank, const std::string& subject_id) {
  for (const auto& m : bank) {
    if (m.subject_id == subject_id) return m;
  }
  throw ConfigError("subject '" + subject_id + "' not found in observer bank");
}

SimulatedObserver::SimulatedObserver(ObserverModel model, std::uint64_t seed)
    : model_(std::move(model)), rng_(seed) {
  model_.validate();
}

double SimulatedObserver::next(const ErrorJudgment& judgment, std::size_t /*step*/) {
  return simulate_decoder(judgment, model_, rng_).p;
}

ReplayedStream::ReplayedStream(std::vector<double> probabilities) : probabilities_(std::move(probabilities)) {}

double ReplayedStream::next(const ErrorJudgment& /*judgment*/, std::size_t step) {
  if (step >= probabilities_.size()) {
    throw UsageError("probability stream exhausted at step " + std::to_string(step) + " (stream has " +
                     std::to_string(probabilities_.size()) + " rows)");
  }
  return probabilities_[step];
}

}  // namespace rlihf
