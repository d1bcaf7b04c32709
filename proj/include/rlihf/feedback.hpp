#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rlihf/env.hpp"
#include "rlihf/rng.hpp"

namespace rlihf {

/// Mean decoder output for the component that agrees with the ground truth
/// on an error (the mirrored component uses 1 - kConfidentErrorMean).
inline constexpr double kConfidentErrorMean = 0.8;
/// Default progress tolerance (meters) for the error rule.
inline constexpr double kDefaultProgressTolerance = 0.005;

/// Per-subject confusion model standing in for a pretrained error decoder.
struct ObserverModel {
  std::string subject_id;
  double tpr = 0.8;        // P(p > 0.5 | error)
  double tnr = 0.8;        // P(p < 0.5 | no error)
  double sharpness = 10.0;  // Beta concentration

  void validate() const;
};

enum class ErrorCause { none, moved_away_from_subgoal, collision };

const char* to_string(ErrorCause cause);

struct ErrorJudgment {
  bool is_error = false;
  ErrorCause cause = ErrorCause::none;
};

struct FeedbackSample {
  double p = 0.5;
  double r_hf = 0.0;
};

struct ShapedReward {
  double r_env = 0.0;
  double p = 0.5;
  double r_hf = 0.0;
  double alpha = 0.0;
  double r_total = 0.0;
};

/// Error iff the step collided or the remaining distance grew by strictly
/// more than `tolerance`. Collision takes precedence as the cause.
ErrorJudgment judge_transition(double prev_distance_to_subgoal, const StepOutcome& curr, double tolerance);

/// Draws a decoder probability. With probability tpr (errors) or tnr
/// (non-errors) the draw lands on the side of 0.5 that agrees with the
/// judgment; the Beta draw is folded about 0.5 so that the side is exact.
FeedbackSample simulate_decoder(const ErrorJudgment& judgment, const ObserverModel& model, Rng& rng);

/// r_hf = 0.5 - p, r_total = r_env + alpha * r_hf.
ShapedReward shape_reward(double r_env, double p, double alpha);

/// Probability stream file: header "step,p", steps 0,1,2,... in order.
std::vector<double> load_probability_stream(const std::filesystem::path& path);
void write_probability_stream(const std::filesystem::path& path, std::span<const double> probabilities);

/// Observer bank file: JSON {"subjects": [{"subject_id", "tpr", "tnr", "sharpness"}, ...]}.
std::vector<ObserverModel> load_observer_bank(const std::filesystem::path& path);
void write_observer_bank(const std::filesystem::path& path, const std::vector<ObserverModel>& bank);
/// Twelve subjects S01..S12 with tpr = tnr evenly spaced over [0.60, 0.90].
std::vector<ObserverModel> default_observer_bank();
const ObserverModel& find_subject(const std::vector<ObserverModel>& bank, const std::string& subject_id);

/// Source of per-timestep decoder probabilities during training.
class FeedbackChannel {
 public:
  virtual ~FeedbackChannel() = default;
  /// Returns p for global training step `step`.
  virtual double next(const ErrorJudgment& judgment, std::size_t step) = 0;
};

class SimulatedObserver final : public FeedbackChannel {
 public:
  SimulatedObserver(ObserverModel model, std::uint64_t seed);
  double next(const ErrorJudgment& judgment, std::size_t step) override;

 private:
  ObserverModel model_;
  Rng rng_;
};

class ReplayedStream final : public FeedbackChannel {
 public:
  explicit ReplayedStream(std::vector<double> probabilities);
  double next(const ErrorJudgment& judgment, std::size_t step) override;

 private:
  std::vector<double> probabilities_;
};

}  // namespace rlihf
