#include "lfvg/training.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "lfvg/losses.hpp"
#include "lfvg/rng.hpp"

namespace lfvg {

using nlohmann::json;

void TrainConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) throw InvalidInputError(std::string("train config: ") + name + " must be positive");
  };
  positive(k, "k");
  positive(max_merge, "max_merge");
  positive(min_len, "min_len");
  positive(n_candidates, "n_candidates");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(hidden, "hidden");
  positive(gru_hidden, "gru_hidden");
  positive(gru_layers, "gru_layers");
  positive(fusion_layers, "fusion_layers");
  positive(fusion_heads, "fusion_heads");
  positive(selector_layers, "selector_layers");
  positive(selector_heads, "selector_heads");
  positive(t_max, "t_max");
  if (!(xi >= 0.0)) throw InvalidInputError("train config: xi must be nonnegative");
  if (!(tau > 0.0)) throw InvalidInputError("train config: tau must be positive");
  if (!(lambda >= 0.0)) throw InvalidInputError("train config: lambda must be nonnegative");
  if (!(reg_weight >= 0.0)) throw InvalidInputError("train config: reg_weight must be nonnegative");
  if (!(learning_rate > 0.0)) throw InvalidInputError("train config: learning_rate must be positive");
  if (!(clip_norm >= 0.0)) throw InvalidInputError("train config: clip_norm must be nonnegative");
  if (hidden % 2 != 0 || hidden % fusion_heads != 0) {
    throw InvalidInputError("train config: hidden must be even and divisible by fusion_heads");
  }
}

TrainConfig paper_preset() {
  TrainConfig c;
  c.preset = "paper";
  c.k = 5;
  c.xi = 1e-4;
  c.lambda = 1.0;
  c.n_candidates = 9;
  c.t_max = 128;
  c.batch_size = 256;
  c.learning_rate = 4e-4;
  c.hidden = 256;
  c.gru_hidden = 256;
  c.gru_layers = 2;
  c.fusion_layers = 3;
  c.fusion_heads = 4;
  c.selector_layers = 2;
  c.selector_heads = 2;
  c.epochs = 100;
  return c;
}

TrainConfig desk_preset() { return TrainConfig{}; }

TrainConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw InvalidInputError("unknown preset '" + name + "' (expected paper or desk)");
}

std::string to_string(TrainMode m) { return m == TrainMode::language_free ? "language_free" : "upper_bound"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "language_free" || s == "language-free") return TrainMode::language_free;
  if (s == "upper_bound" || s == "upper-bound") return TrainMode::upper_bound;
  throw InvalidInputError("unknown training mode '" + s + "'");
}

std::string to_string(SelectionStrategy s) { return s == SelectionStrategy::transformer ? "transformer" : "random"; }

SelectionStrategy selection_from_string(const std::string& s) {
  if (s == "transformer" || s == "st") return SelectionStrategy::transformer;
  if (s == "random") return SelectionStrategy::random;
  throw InvalidInputError("unknown selection strategy '" + s + "'");
}

json to_json(const TrainConfig& c) {
  return json{{"preset", c.preset},
              {"mode", to_string(c.mode)},
              {"seed", c.seed},
              {"k", c.k},
              {"max_merge", c.max_merge},
              {"min_len", c.min_len},
              {"n_candidates", c.n_candidates},
              {"xi", c.xi},
              {"tau", c.tau},
              {"hard", c.hard},
              {"selection", to_string(c.selection)},
              {"lambda", c.lambda},
              {"reg_weight", c.reg_weight},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"clip_norm", c.clip_norm},
              {"hidden", c.hidden},
              {"gru_hidden", c.gru_hidden},
              {"gru_layers", c.gru_layers},
              {"fusion_layers", c.fusion_layers},
              {"fusion_heads", c.fusion_heads},
              {"selector_layers", c.selector_layers},
              {"selector_heads", c.selector_heads},
              {"t_max", c.t_max}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw InvalidInputError("train config: expected a JSON object");
  TrainConfig c = base;
  if (j.contains("preset") && j["preset"].get<std::string>() != base.preset) {
    c = preset(j["preset"].get<std::string>());
  }
  const json known = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw InvalidInputError("train config: unknown key '" + it.key() + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("k", c.k);
    get("max_merge", c.max_merge);
    get("min_len", c.min_len);
    get("n_candidates", c.n_candidates);
    get("xi", c.xi);
    get("tau", c.tau);
    get("hard", c.hard);
    get("lambda", c.lambda);
    get("reg_weight", c.reg_weight);
    get("batch_size", c.batch_size);
    get("learning_rate", c.learning_rate);
    get("epochs", c.epochs);
    get("clip_norm", c.clip_norm);
    get("hidden", c.hidden);
    get("gru_hidden", c.gru_hidden);
    get("gru_layers", c.gru_layers);
    get("fusion_layers", c.fusion_layers);
    get("fusion_heads", c.fusion_heads);
    get("selector_layers", c.selector_layers);
    get("selector_heads", c.selector_heads);
    get("t_max", c.t_max);
    if (j.contains("mode")) c.mode = train_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("selection")) c.selection = selection_from_string(j["selection"].get<std::string>());
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t config_hash(const TrainConfig& c) {
  const std::string s = to_json(c).dump();
  return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------- Adam

Adam::Adam(Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& values, const Vector& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  values.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

// ---------------------------------------------------------------- samples

namespace {

bool has_frame_in(const VideoView& v, const TemporalInterval& iv) {
  for (double t : v.frame_times) {
    const double u = t / v.duration_s;
    if ((u >= iv.start && u < iv.end) || (iv.end >= 1.0 && u >= iv.start && u <= 1.0)) return true;
  }
  return false;
}

SegmentSpan span_of(const TemporalInterval& iv, Index T) {
  Index first = static_cast<Index>(std::llround(iv.start * T));
  Index last = static_cast<Index>(std::llround(iv.end * T)) - 1;
  first = std::clamp<Index>(first, 0, T - 1);
  last = std::clamp<Index>(last, first, T - 1);
  return {first, last};
}

}  // namespace

GroundingConfig grounding_config(const TrainConfig& cfg, Index video_dim, Index query_dim) {
  GroundingConfig g;
  g.video_dim = video_dim;
  g.query_dim = query_dim;
  g.hidden = cfg.hidden;
  g.gru_hidden = cfg.gru_hidden;
  g.gru_layers = cfg.gru_layers;
  g.fusion_layers = cfg.fusion_layers;
  g.fusion_heads = cfg.fusion_heads;
  g.t_max = cfg.t_max;
  return g;
}

SelectorConfig selector_config(const TrainConfig& cfg, Index query_dim) {
  SelectorConfig s;
  s.dim = query_dim;
  s.layers = cfg.selector_layers;
  s.heads = cfg.selector_heads;
  s.ffn_dim = 2 * query_dim;
  return s;
}

std::vector<SampleRef> build_samples(const TrainingView& view, const TrainConfig& cfg, std::size_t* dropped) {
  std::vector<SampleRef> samples;
  std::size_t lost = 0;
  for (std::size_t i = 0; i < view.num_videos(); ++i) {
    const VideoView v = view.video(i);
    const FeatureMatrix f = pool_to_length(v.segment_features, cfg.t_max);
    const Index T = f.rows();
    std::vector<TemporalProposal> proposals;
    if (cfg.mode == TrainMode::upper_bound) {
      const auto& events = view.ground_truth_events(i);
      if (events.empty()) {
        throw InvalidInputError("upper-bound training: video " + v.id + " has no ground-truth intervals");
      }
      // Ground truth stands in for the clustering only; merging is shared.
      std::vector<SegmentSpan> spans;
      for (const auto& e : events) spans.push_back(span_of(e.interval, T));
      std::sort(spans.begin(), spans.end());
      proposals = merge_consecutive(spans, cfg.max_merge, cfg.min_len, T);
    } else {
      try {
        proposals = generate_proposals(f, {cfg.k, cfg.max_merge, cfg.min_len},
                                       derive_seed(cfg.seed, {tag(Stream::kmeans), i}));
      } catch (const InvalidInputError&) {
        ++lost;  // fewer than k distinct segments
        continue;
      }
    }
    for (auto& p : proposals) {
      if (!has_frame_in(v, p.interval)) {
        ++lost;
        continue;
      }
      samples.push_back({i, p});
    }
  }
  if (dropped) *dropped = lost;
  return samples;
}

SampleLoss grounding_loss(const GroundingModel& model, const FeatureMatrix& features, const Vector& query,
                          const TemporalInterval& target, double reg_weight, double lambda,
                          Vector* model_grads, Vector* d_query) {
  const bool need_grad = model_grads || d_query;
  GroundingModel::Cache cache;
  const GroundingOutput out = model.forward(features, query, need_grad ? &cache : nullptr);
  const Vector mask = make_target_mask(target, features.rows());
  SampleLoss l;
  l.loss_reg = loss_reg(out.prediction, target);
  l.loss_att = loss_att(out.attention, mask);
  l.total = reg_weight * l.loss_reg + lambda * l.loss_att;
  if (need_grad) {
    const auto [ds, de] = loss_reg_grad(out.prediction, target);
    const Vector da = lambda * loss_att_grad(out.attention, mask);
    Vector scratch;
    Vector* g = model_grads;
    if (!g) {
      scratch = model.params().zero_grads();
      g = &scratch;
    }
    const Vector dq = model.backward(*g, cache, reg_weight * ds, reg_weight * de, da);
    if (d_query) *d_query = dq;
  }
  return l;
}

// ---------------------------------------------------------------- train

TrainResult train(const TrainingView& view, const TrainConfig& cfg, const ProgressCallback& progress) {
  cfg.validate();
  if (view.num_videos() == 0) throw TrainingDataError("training: dataset has no videos");
  const VideoView first = view.video(0);
  const Index video_dim = first.segment_features.cols();
  const Index query_dim = first.frame_features.cols();

  TrainResult r{GroundingModel(grounding_config(cfg, video_dim, query_dim),
                               derive_seed(cfg.seed, {tag(Stream::init_grounding)})),
                SelectionTransformer(selector_config(cfg, query_dim),
                                     derive_seed(cfg.seed, {tag(Stream::init_selector)})),
                {}, {}, 0, 0};

  const std::vector<SampleRef> samples = build_samples(view, cfg, &r.dropped_proposals);
  if (samples.empty()) throw TrainingDataError("training: no usable proposal in any video");
  r.samples_per_epoch = samples.size();

  // Pooled features are reused every epoch.
  std::vector<FeatureMatrix> features(view.num_videos());
  for (const auto& s : samples) {
    if (features[s.video].size() == 0) {
      features[s.video] = pool_to_length(view.video(s.video).segment_features, cfg.t_max);
    }
  }

  const bool use_selector = cfg.selection == SelectionStrategy::transformer;
  PseudoQueryConfig pq;
  pq.n_candidates = cfg.n_candidates;
  pq.xi = cfg.xi;
  pq.tau = cfg.tau;
  pq.hard = cfg.hard;
  pq.strategy = cfg.selection;

  Params& gp = r.model.params();
  Params& sp = r.selector.params();
  Adam model_opt(gp.size(), cfg.learning_rate);
  Adam selector_opt(sp.size(), cfg.learning_rate);
  Vector model_grads = gp.zero_grads();
  Vector selector_grads = sp.zero_grads();

  std::vector<std::size_t> order(samples.size());
  long step = 0;
  for (long epoch = 0; epoch < static_cast<long>(cfg.epochs); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {tag(Stream::epoch_shuffle), static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      model_grads.setZero();
      selector_grads.setZero();
      StepLoss sl;
      sl.step = step;
      sl.epoch = epoch;
      // Inputs were validated up front; a rejection from here on means the
      // parameters have drifted into overflow.
      try {
        for (std::size_t b = begin; b < end; ++b) {
          const std::size_t si = order[b];
          const SampleRef& s = samples[si];
          const std::uint64_t pair_seed = derive_seed(
              cfg.seed, {tag(Stream::pair), static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(si)});
          SelectionTransformer::Cache sel_cache;
          const TrainingPair pair = make_training_pair(view.video(s.video), s.proposal, r.selector, pq, pair_seed,
                                                       use_selector ? &sel_cache : nullptr);
          Vector d_query;
          const SampleLoss l = grounding_loss(r.model, features[s.video], pair.pseudo.q_tilde, pair.target,
                                              cfg.reg_weight, cfg.lambda, &model_grads,
                                              use_selector ? &d_query : nullptr);
          if (!std::isfinite(l.total)) throw NumericError("training: non-finite loss", step);
          if (use_selector) r.selector.backward(selector_grads, sel_cache, d_query);
          sl.loss_reg += l.loss_reg;
          sl.loss_att += l.loss_att;
          sl.total += l.total;
        }
      } catch (const InvalidInputError& e) {
        throw NumericError(std::string("training: ") + e.what(), step);
      }
      const double n = static_cast<double>(end - begin);
      model_grads /= n;
      selector_grads /= n;
      if (!model_grads.allFinite() || !selector_grads.allFinite()) {
        throw NumericError("training: non-finite gradient", step);
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(model_grads.squaredNorm() + selector_grads.squaredNorm());
        if (norm > cfg.clip_norm) {
          model_grads *= cfg.clip_norm / norm;
          selector_grads *= cfg.clip_norm / norm;
        }
      }
      model_opt.step(gp.values(), model_grads);
      if (use_selector) selector_opt.step(sp.values(), selector_grads);
      if (!gp.values().allFinite() || !sp.values().allFinite()) {
        throw NumericError("training: parameters overflowed", step);
      }
      sl.loss_reg /= n;
      sl.loss_att /= n;
      sl.total /= n;
      epoch_total += sl.total * n;
      r.curve.push_back(sl);
      ++step;
    }
    r.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));
    if (progress) progress({epoch, r.epoch_loss.back(), order.size()});
  }
  return r;
}

TrainResult train(const Dataset& d, const TrainConfig& cfg, const ProgressCallback& progress) {
  const TrainingView view(d);
  return train(view, cfg, progress);
}

TrainResult train_upper_bound(const Dataset& d, TrainConfig cfg, const ProgressCallback& progress) {
  for (const auto& v : d.videos) {
    if (v.hidden_events.empty()) {
      throw InvalidInputError("upper-bound training: video " + v.id + " has no ground-truth intervals");
    }
  }
  cfg.mode = TrainMode::upper_bound;
  return train(d, cfg, progress);
}

}  // namespace lfvg
