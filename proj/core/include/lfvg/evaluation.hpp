#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "lfvg/embedding_space.hpp"
#include "lfvg/grounding.hpp"
#include "lfvg/training.hpp"

namespace lfvg {

/// |intersection| / |union|; 0 when the union has zero length.
double tiou(const TemporalInterval& pred, const TemporalInterval& gt);

/// Percentage of tIoUs strictly greater than `threshold`.
double recall_at(std::span<const double> tious, double threshold);

/// 100 × arithmetic mean of the tIoUs.
double mean_iou(std::span<const double> tious);

inline constexpr double kRecallThresholds[] = {0.3, 0.5, 0.7};

struct EvalResult {
  std::map<double, double> recall_at;  ///< threshold → percentage
  double miou = 0.0;                   ///< percentage
  std::size_t n_queries = 0;
  std::vector<double> tious;
};

EvalResult summarize(std::vector<double> tious);

/// Maps (video, unit-norm query feature) to a predicted interval.
using IntervalPredictor = std::function<TemporalInterval(const VideoRecord&, const Vector&)>;

/// Runs the predictor on every query and aggregates R@{0.3,0.5,0.7} and mIoU.
/// Throws EvaluationError listing queries whose video is missing.
EvalResult evaluate(const IntervalPredictor& predict, const Dataset& d);
/// Evaluates a grounding model; features longer than T_max are pooled.
EvalResult evaluate(const GroundingModel& model, const Dataset& d);

/// Mean tIoU (percentage) of uniformly random intervals against randomly
/// chosen ground-truth intervals of the split.
double random_baseline_miou(const Dataset& d, std::size_t draws = 10000, std::uint64_t seed = 0);

nlohmann::json to_json(const EvalResult& r);
std::string format_table(const EvalResult& r);

// ---------------------------------------------------------------- ablations

/// A synthetic train/test benchmark. For a run seed s the world seed becomes
/// s; training videos are indices [0, n_train), test videos the next n_test.
struct BenchmarkConfig {
  AlignmentConfig world;
  Index n_train = 200;
  Index n_test = 100;
  Index segments = 32;
  Index events = 5;
  Index frames_per_segment = 3;

  Dataset train_split(std::uint64_t seed) const;
  Dataset test_split(std::uint64_t seed) const;
};

nlohmann::json to_json(const BenchmarkConfig& b);
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j, const BenchmarkConfig& base);

enum class AblationSuite { losses, selection, n_frames, upper_bound, alignment };

AblationSuite ablation_suite_from_string(const std::string& s);
std::string to_string(AblationSuite s);

struct VariantResult {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalResult> runs;
  double mean_miou = 0.0;
  double sd_miou = 0.0;
  /// Hash of the training and benchmark configuration with the varied field
  /// reset to its base value; equal across the variants of one suite.
  std::uint64_t controlled_hash = 0;
};

struct OrderingCheck {
  std::string description;
  bool holds = false;
};

struct AblationReport {
  std::string suite;
  std::vector<VariantResult> variants;
  std::vector<OrderingCheck> orderings;

  bool all_orderings_hold() const;
  const VariantResult& variant(const std::string& name) const;
};

/// Trained models keyed by (training config, training data); variants that
/// resolve to identical training inputs share one run.
class RunCache {
 public:
  std::shared_ptr<const TrainResult> get_or_train(const TrainConfig& cfg, const Dataset& train_data,
                                                  const ProgressCallback& progress = {});
  std::size_t trainings() const { return trainings_; }
  std::size_t hits() const { return hits_; }

 private:
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::shared_ptr<const TrainResult>> runs_;
  std::size_t trainings_ = 0;
  std::size_t hits_ = 0;
};

using AblationProgress = std::function<void(const std::string& variant, std::uint64_t seed, const EvalResult&)>;

/// Trains and evaluates every variant of `suite` on every seed with
/// otherwise identical settings, then evaluates the suite's orderings on the
/// seed-averaged mIoU:
///   losses      {reg-only, att-only, both}: both > reg-only > att-only
///   selection   {random, transformer}: transformer > random
///   n_frames    N ∈ {1, 2, 4, 8, 9, 16}: none
///   upper_bound {language-free, upper-bound}: upper-bound ≥ language-free − 2 points
///   alignment   σ_a ∈ {0, 0.5, 1, 2}: nonincreasing
AblationReport run_ablation(AblationSuite suite, const TrainConfig& base, const BenchmarkConfig& bench,
                            const std::vector<std::uint64_t>& seeds, RunCache* cache = nullptr,
                            const AblationProgress& progress = {});

nlohmann::json to_json(const AblationReport& r);
std::string format_table(const AblationReport& r);
/// One row per variant and seed: variant,seed,r03,r05,r07,miou.
std::string to_csv(const AblationReport& r);

}  // namespace lfvg
