#include "lfvg/pseudo_query.hpp"

#include <numeric>

namespace lfvg {

CandidateSet sample_candidates(const VideoView& video, const TemporalProposal& proposal, Index n,
                               Rng& rng) {
  if (n < 1) throw InvalidInputError("sample_candidates: N must be positive");
  std::vector<Index> inside;
  const auto& iv = proposal.interval;
  for (Index m = 0; m < static_cast<Index>(video.frame_times.size()); ++m) {
    const double t = video.frame_times[m] / video.duration_s;
    if ((t >= iv.start && t < iv.end) || (iv.end >= 1.0 && t >= iv.start && t <= 1.0)) {
      inside.push_back(m);
    }
  }
  if (inside.empty()) {
    throw SkipProposalError("sample_candidates: proposal [" + std::to_string(iv.start) + ", " +
                            std::to_string(iv.end) + "] of video " + video.id + " holds no frame");
  }
  CandidateSet c;
  const auto available = static_cast<Index>(inside.size());
  if (available >= n) {
    // Partial Fisher-Yates.
    for (Index i = 0; i < n; ++i) {
      const auto j = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(available - i)));
      std::swap(inside[i], inside[j]);
      c.source_frame_indices.push_back(inside[i]);
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      c.source_frame_indices.push_back(inside[rng.uniform_index(static_cast<std::uint64_t>(available))]);
    }
  }
  c.q.resize(n, video.frame_features.cols());
  for (Index i = 0; i < n; ++i) c.q.row(i) = video.frame_features.row(c.source_frame_indices[i]);
  return c;
}

Vector perturbation_step(const Vector& q, double xi, const Vector& eps) {
  if (!(xi >= 0.0)) throw InvalidInputError("perturb: xi must be nonnegative");
  if (eps.size() != q.size()) throw InvalidInputError("perturb: noise size mismatch");
  const double qn = q.norm();
  if (!(qn > 0.0)) throw InvalidInputError("perturb: zero-norm feature");
  const double en = eps.norm();
  if (xi == 0.0 || en == 0.0) return q;
  return q + xi * eps * (qn / en);
}

Vector perturb_with_noise(const Vector& q, double xi, const Vector& eps) {
  const Vector s = perturbation_step(q, xi, eps);
  return s / s.norm();
}

Vector perturb(const Vector& q, double xi, Rng& rng) {
  return perturb_with_noise(q, xi, rng.normal_vector(q.size()));
}

void perturb_candidates(CandidateSet& c, double xi, Rng& rng) {
  for (Index i = 0; i < c.q.rows(); ++i) {
    c.q.row(i) = perturb(c.q.row(i).transpose(), xi, rng).transpose();
  }
}

// ---------------------------------------------------------------- SelectionTransformer

SelectionTransformer::SelectionTransformer(const SelectorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  for (Index l = 0; l < cfg.layers; ++l) {
    // A shift after the last layer moves every logit equally.
    layers_.emplace_back(params_, "selector.layer" + std::to_string(l), cfg.dim, cfg.heads, cfg.ffn_dim,
                         /*output_shift=*/l + 1 < cfg.layers);
  }
  score_ = Linear(params_, "selector.score", cfg.dim, 1, /*bias=*/false);
  params_.initialize(seed);
}

Vector SelectionTransformer::logits(const Matrix& candidates, Cache* cache) const {
  if (candidates.cols() != cfg_.dim) throw InvalidInputError("selector: candidate dimension mismatch");
  if (cache) cache->layers.assign(layers_.size(), {});
  Matrix x = candidates;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layers_[l].forward(params_, x, cache ? &cache->layers[l] : nullptr);
  }
  Vector out = score_.forward(params_, x).col(0);
  if (cache) cache->tokens = std::move(x);
  return out;
}

PseudoLanguageFeature SelectionTransformer::select(const CandidateSet& c, const SelectOptions& opts,
                                                   Rng* rng, Cache* cache) const {
  const Index n = c.size();
  if (n < 1) throw InvalidInputError("select: empty candidate set");
  Vector scores = opts.logits_override ? *opts.logits_override : logits(c.q, cache);
  if (scores.size() != n) throw InvalidInputError("select: logit count mismatch");

  Vector noise;
  if (opts.gumbel_noise) {
    noise = *opts.gumbel_noise;
  } else if (rng) {
    noise = draw_gumbel_noise(n, *rng);
  } else {
    noise = Vector::Zero(n);
  }
  GumbelSample s = gumbel_softmax(scores, opts.tau, opts.hard, noise);
  Vector w = s.value;
  if (opts.anchor_soft) {
    w = s.soft - *opts.anchor_soft;
    w[opts.anchor_index] += 1.0;
  }

  PseudoLanguageFeature out;
  out.selected_index = s.index;
  out.soft_weights = s.soft;
  Vector pooled = c.q.transpose() * w;
  if (opts.hard && !opts.anchor_soft) pooled = c.q.row(s.index).transpose();
  const double norm = pooled.norm();
  if (!(norm > 0.0)) throw InvalidInputError("select: pooled feature has zero norm");
  out.q_tilde = pooled / norm;
  if (cache) {
    cache->candidates = c.q;
    cache->sample = std::move(s);
    cache->weights = std::move(w);
    cache->pooled = std::move(pooled);
    cache->tau = opts.tau;
    cache->from_override = opts.logits_override != nullptr;
  }
  return out;
}

void SelectionTransformer::backward(Vector& grads, const Cache& c, const Vector& d_q_tilde) const {
  const double norm = c.pooled.norm();
  const Vector q_tilde = c.pooled / norm;
  const Vector d_pooled = (d_q_tilde - q_tilde * q_tilde.dot(d_q_tilde)) / norm;
  const Vector d_weights = c.candidates * d_pooled;
  if (c.from_override) return;
  const Vector d_scores = gumbel_softmax_backward(c.sample, d_weights, c.tau);
  Matrix d = score_.backward(params_, grads, c.tokens, Matrix(d_scores));
  for (std::size_t l = layers_.size(); l-- > 0;) d = layers_[l].backward(params_, grads, c.layers[l], d);
}

TrainingPair make_training_pair(const VideoView& video, const TemporalProposal& proposal,
                                const SelectionTransformer& selector, const PseudoQueryConfig& cfg,
                                std::uint64_t seed, SelectionTransformer::Cache* cache) {
  Rng rng(seed);
  TrainingPair pair;
  pair.target = proposal.interval;
  pair.candidates = sample_candidates(video, proposal, cfg.n_candidates, rng);
  perturb_candidates(pair.candidates, cfg.xi, rng);
  const Index n = pair.candidates.size();
  pair.gumbel_noise = draw_gumbel_noise(n, rng);
  if (cfg.strategy == SelectionStrategy::random) {
    const auto pick = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    pair.pseudo.selected_index = pick;
    pair.pseudo.soft_weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
    pair.pseudo.q_tilde = pair.candidates.q.row(pick).transpose().normalized();
  } else {
    SelectOptions opts;
    opts.hard = cfg.hard;
    opts.tau = cfg.tau;
    opts.gumbel_noise = &pair.gumbel_noise;
    pair.pseudo = selector.select(pair.candidates, opts, nullptr, cache);
  }
  return pair;
}

}  // namespace lfvg
