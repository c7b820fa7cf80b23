#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfvg/embedding_space.hpp"
#include "lfvg/layers.hpp"
#include "lfvg/ops.hpp"
#include "lfvg/params.hpp"
#include "lfvg/proposal.hpp"
#include "lfvg/rng.hpp"

namespace lfvg {

/// N candidate frame features drawn from one proposal.
struct CandidateSet {
  Matrix q;  ///< N × D_q
  std::vector<Index> source_frame_indices;

  Index size() const { return q.rows(); }
};

/// Draws N frames uniformly from those inside the proposal: without
/// replacement when at least N exist, with replacement otherwise. Throws
/// SkipProposalError when the proposal holds no frame.
CandidateSet sample_candidates(const VideoView& video, const TemporalProposal& proposal, Index n,
                               Rng& rng);

/// q + ξ·ε·‖q‖/‖ε‖ for a given ε, before normalization.
Vector perturbation_step(const Vector& q, double xi, const Vector& eps);
/// Perturbs with a given ε and projects back to the unit sphere.
Vector perturb_with_noise(const Vector& q, double xi, const Vector& eps);
/// Perturbs with ε ~ N(0, I) drawn from `rng`.
Vector perturb(const Vector& q, double xi, Rng& rng);
/// Perturbs every candidate row in place.
void perturb_candidates(CandidateSet& c, double xi, Rng& rng);

struct SelectorConfig {
  Index dim = 32;
  Index layers = 2;
  Index heads = 2;
  Index ffn_dim = 64;
};

/// The chosen pseudo language feature.
struct PseudoLanguageFeature {
  Vector q_tilde;  ///< unit norm
  Index selected_index = 0;
  Vector soft_weights;
};

struct SelectOptions {
  bool hard = true;
  double tau = 1.0;
  /// Pinned Gumbel noise (size N). A zero vector disables the perturbation.
  const Vector* gumbel_noise = nullptr;
  /// Replaces the transformer's logits (test hook).
  const Vector* logits_override = nullptr;
  /// Straight-through anchor for finite-difference verification: the forward
  /// weights become onehot(anchor_index) + soft − anchor_soft, whose value
  /// equals the hard forward at the anchor point and whose exact derivative
  /// is the straight-through gradient.
  const Vector* anchor_soft = nullptr;
  Index anchor_index = 0;
};

/// Low-capacity transformer that scores candidate frame features; a
/// Gumbel-softmax over the scores picks the pseudo language feature.
class SelectionTransformer {
 public:
  struct Cache {
    std::vector<TransformerEncoderLayer::Cache> layers;
    Matrix tokens;  ///< encoder output
    Matrix candidates;
    GumbelSample sample;
    Vector weights;  ///< forward weights actually applied
    Vector pooled;   ///< weightsᵀ q before normalization
    double tau = 1.0;
    bool from_override = false;
  };

  SelectionTransformer() = default;
  SelectionTransformer(const SelectorConfig& cfg, std::uint64_t seed);

  /// Per-candidate scores, length N.
  Vector logits(const Matrix& candidates, Cache* cache = nullptr) const;

  /// Contextualizes the candidates, draws the Gumbel-softmax weights and
  /// returns q̃ = normalize(weightsᵀ q). In hard mode q̃ is one candidate row.
  PseudoLanguageFeature select(const CandidateSet& c, const SelectOptions& opts, Rng* rng,
                               Cache* cache = nullptr) const;

  /// Accumulates ∂L/∂θ into `grads` given ∂L/∂q̃.
  void backward(Vector& grads, const Cache& cache, const Vector& d_q_tilde) const;

  const Params& params() const { return params_; }
  Params& params() { return params_; }
  const SelectorConfig& config() const { return cfg_; }

 private:
  SelectorConfig cfg_;
  Params params_;
  std::vector<TransformerEncoderLayer> layers_;
  Linear score_;
};

enum class SelectionStrategy { transformer, random };

struct PseudoQueryConfig {
  Index n_candidates = 9;
  double xi = 1e-4;
  double tau = 1.0;
  bool hard = true;
  SelectionStrategy strategy = SelectionStrategy::transformer;
};

/// Inputs of one differentiable training step plus the pseudo feature they
/// produce under the current selector.
struct TrainingPair {
  CandidateSet candidates;  ///< already perturbed
  Vector gumbel_noise;
  TemporalInterval target;
  PseudoLanguageFeature pseudo;
};

/// Samples, perturbs and selects for one proposal. All randomness comes from
/// `seed`; `cache` receives what the selector's backward pass needs.
TrainingPair make_training_pair(const VideoView& video, const TemporalProposal& proposal,
                                const SelectionTransformer& selector, const PseudoQueryConfig& cfg,
                                std::uint64_t seed, SelectionTransformer::Cache* cache = nullptr);

}  // namespace lfvg
