#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "lfvg/embedding_space.hpp"
#include "lfvg/grounding.hpp"
#include "lfvg/pseudo_query.hpp"
#include "lfvg/proposal.hpp"

namespace lfvg {

enum class TrainMode { language_free, upper_bound };

struct TrainConfig {
  std::string preset = "desk";
  TrainMode mode = TrainMode::language_free;
  std::uint64_t seed = 0;

  // Proposals.
  Index k = 5;
  Index max_merge = 2;
  Index min_len = 2;

  // Pseudo language features.
  Index n_candidates = 9;
  double xi = 1e-4;
  double tau = 1.0;
  bool hard = true;
  SelectionStrategy selection = SelectionStrategy::transformer;

  // Objective: reg_weight·L_reg + λ·L_att.
  double lambda = 1.0;
  double reg_weight = 1.0;

  // Optimization.
  Index batch_size = 32;
  double learning_rate = 4e-4;
  Index epochs = 16;
  double clip_norm = 0.0;  ///< global-norm clipping, 0 disables

  // Architecture.
  Index hidden = 64;
  Index gru_hidden = 32;
  Index gru_layers = 2;
  Index fusion_layers = 3;
  Index fusion_heads = 4;
  Index selector_layers = 2;
  Index selector_heads = 2;
  Index t_max = 128;

  void validate() const;
};

/// Grounding and selector shapes implied by a training config.
GroundingConfig grounding_config(const TrainConfig& cfg, Index video_dim, Index query_dim);
SelectorConfig selector_config(const TrainConfig& cfg, Index query_dim);

/// Reported hyperparameters at full scale.
TrainConfig paper_preset();
/// Desk-scale defaults for the synthetic benchmark.
TrainConfig desk_preset();
/// Preset by name ("paper" or "desk").
TrainConfig preset(const std::string& name);

nlohmann::json to_json(const TrainConfig& c);
/// Overlays the keys present in `j` onto `base`; unknown keys are an error.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base);
/// FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const TrainConfig& c);

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(SelectionStrategy s);
SelectionStrategy selection_from_string(const std::string& s);

struct StepLoss {
  long step = 0;
  long epoch = 0;
  double loss_reg = 0.0;
  double loss_att = 0.0;
  double total = 0.0;
};

struct EpochSummary {
  long epoch = 0;
  double mean_loss = 0.0;
  std::size_t samples = 0;
};

using ProgressCallback = std::function<void(const EpochSummary&)>;

struct TrainResult {
  GroundingModel model;
  SelectionTransformer selector;
  std::vector<StepLoss> curve;
  std::vector<double> epoch_loss;
  std::size_t samples_per_epoch = 0;
  std::size_t dropped_proposals = 0;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam(Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vector& values, const Vector& grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

/// One cached training sample: a video and one of its proposals.
struct SampleRef {
  std::size_t video = 0;
  TemporalProposal proposal;
};

/// Proposals for every video seen through `view`: generated from segment
/// features in language_free mode, read from ground truth in upper_bound
/// mode. Proposals without frames are dropped and counted.
std::vector<SampleRef> build_samples(const TrainingView& view, const TrainConfig& cfg,
                                     std::size_t* dropped = nullptr);

/// Language-free (or upper-bound, per cfg.mode) training.
TrainResult train(const TrainingView& view, const TrainConfig& cfg, const ProgressCallback& progress = {});
TrainResult train(const Dataset& d, const TrainConfig& cfg, const ProgressCallback& progress = {});
/// Training with ground-truth intervals in place of proposals.
TrainResult train_upper_bound(const Dataset& d, TrainConfig cfg, const ProgressCallback& progress = {});

/// Loss terms of one sample.
struct SampleLoss {
  double loss_reg = 0.0;
  double loss_att = 0.0;
  double total = 0.0;
};

/// Forward pass and reg_weight·L_reg + λ·L_att for one (features, query,
/// target) triple. When `model_grads` is given the parameter gradients are
/// accumulated into it; when `d_query` is given it receives ∂L/∂query.
SampleLoss grounding_loss(const GroundingModel& model, const FeatureMatrix& features,
                          const Vector& query, const TemporalInterval& target, double reg_weight,
                          double lambda, Vector* model_grads = nullptr, Vector* d_query = nullptr);

}  // namespace lfvg
