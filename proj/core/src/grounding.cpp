#include "lfvg/grounding.hpp"

#include <algorithm>

#include "lfvg/ops.hpp"

namespace lfvg {

GroundingModel::GroundingModel(const GroundingConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.hidden < 2 || cfg.hidden % 2 != 0) throw InvalidInputError("grounding: hidden must be even");
  if (cfg.hidden % cfg.fusion_heads != 0) {
    throw InvalidInputError("grounding: hidden not divisible by fusion heads");
  }
  const Index d = cfg.hidden;
  proj_ = Linear(params_, "grounding.proj", cfg.video_dim, d);
  gru_ = BiGru(params_, "grounding.gru", d, cfg.gru_hidden, cfg.gru_layers);
  encoder_mlp_ = Mlp(params_, "grounding.encoder", {2 * cfg.gru_hidden + d, d, d});
  for (Index l = 0; l < cfg.fusion_layers; ++l) {
    const std::string name = "grounding.fusion" + std::to_string(l);
    fusion_.push_back(FusionLayer{
        // The language feature is the only key, so cross-attention reduces to its value path.
        MultiHeadAttention(params_, name + ".cross", d, cfg.query_dim, cfg.query_dim, d, cfg.fusion_heads,
                           /*single_key=*/true),
        MultiHeadAttention(params_, name + ".self", d, d, d, d, cfg.fusion_heads),
        LayerNorm(params_, name + ".ln1", d), LayerNorm(params_, name + ".ln2", d)});
  }
  scorer_ = Mlp(params_, "grounding.scorer", {d, std::max<Index>(1, d / 2), 1}, Activation::tanh,
                Activation::linear, /*output_bias=*/false);
  head_ = Mlp(params_, "grounding.head", {d, d, 2}, Activation::relu, Activation::sigmoid);
  params_.initialize(seed);
}

Matrix GroundingModel::encode_video(const FeatureMatrix& f, EncodeCache* cache) const {
  if (f.rows() < 1) throw InvalidInputError("encode_video: empty sequence");
  if (f.rows() > cfg_.t_max) {
    throw InvalidInputError("encode_video: sequence length " + std::to_string(f.rows()) +
                            " exceeds T_max " + std::to_string(cfg_.t_max));
  }
  if (f.cols() != cfg_.video_dim) throw InvalidInputError("encode_video: feature dimension mismatch");
  require_finite(f, "encode_video");
  const Index d = cfg_.hidden;
  Matrix fhat = proj_.forward(params_, f) + positional_encoding(f.rows(), d);
  const Matrix g = gru_.forward(params_, fhat, cache ? &cache->gru : nullptr);
  Matrix cat(f.rows(), g.cols() + d);
  cat << g, fhat;
  Matrix s = encoder_mlp_.forward(params_, cat, cache ? &cache->mlp : nullptr);
  if (cache) {
    cache->f = f;
    cache->fhat = std::move(fhat);
  }
  return s;
}

std::pair<Matrix, Vector> GroundingModel::fuse(const Matrix& s, const Vector& query, FuseCache* cache) const {
  if (query.size() != cfg_.query_dim) throw InvalidInputError("fuse: query dimension mismatch");
  if (s.cols() != cfg_.hidden) throw InvalidInputError("fuse: sequence dimension mismatch");
  const Matrix token = query.transpose();
  if (cache) cache->layers.assign(fusion_.size(), {});
  Matrix x = s;
  for (std::size_t l = 0; l < fusion_.size(); ++l) {
    const auto& layer = fusion_[l];
    FusionLayerCache* lc = cache ? &cache->layers[l] : nullptr;
    const Matrix c = layer.cross.forward(params_, x, token, token, lc ? &lc->cross : nullptr);
    x = layer.ln1.forward(params_, x + c, lc ? &lc->ln1 : nullptr);
    const Matrix a = layer.self.forward(params_, x, x, x, lc ? &lc->self : nullptr);
    x = layer.ln2.forward(params_, x + a, lc ? &lc->ln2 : nullptr);
  }
  const Vector logits = scorer_.forward(params_, x, cache ? &cache->scorer : nullptr).col(0);
  Vector attention = softmax(logits);
  if (cache) {
    cache->sequence = x;
    cache->attention = attention;
  }
  return {std::move(x), std::move(attention)};
}

TemporalInterval GroundingModel::predict_interval(const Matrix& fused, const Vector& attention,
                                                  HeadCache* cache) const {
  if (attention.size() != fused.rows()) throw InvalidInputError("predict_interval: attention length mismatch");
  const Matrix pooled = attention.transpose() * fused;
  const Matrix u = head_.forward(params_, pooled, cache ? &cache->mlp : nullptr);
  const double us = u(0, 0);
  const double ue = u(0, 1);
  if (cache) {
    cache->pooled = pooled;
    cache->u_start = us;
    cache->u_end = ue;
  }
  return {std::min(us, ue), std::max(us, ue)};
}

GroundingOutput GroundingModel::forward(const FeatureMatrix& f, const Vector& query, Cache* cache,
                                        ForwardTrace* trace) const {
  if (trace) trace->push_back("encode_video");
  const Matrix s = encode_video(f, cache ? &cache->encode : nullptr);
  if (trace) trace->push_back("fuse");
  auto [fused, attention] = fuse(s, query, cache ? &cache->fuse : nullptr);
  if (trace) trace->push_back("predict_interval");
  HeadCache local;
  HeadCache* hc = cache ? &cache->head : &local;
  GroundingOutput out;
  out.prediction = predict_interval(fused, attention, hc);
  out.raw_start = hc->u_start;
  out.raw_end = hc->u_end;
  out.attention = std::move(attention);
  out.fused = std::move(fused);
  return out;
}

Vector GroundingModel::backward(Vector& grads, const Cache& c, double d_start, double d_end,
                                const Vector& d_attention) const {
  // Head: the (min, max) ordering routes each gradient to the raw output it came from.
  Matrix du(1, 2);
  if (c.head.u_start <= c.head.u_end) {
    du << d_start, d_end;
  } else {
    du << d_end, d_start;
  }
  const Matrix d_pooled = head_.backward(params_, grads, c.head.mlp, du);
  const Vector& a = c.fuse.attention;
  const Matrix& x_final = c.fuse.sequence;

  // pooled = aᵀ X
  Matrix dx = a * d_pooled;
  Vector da = x_final * d_pooled.transpose();
  if (d_attention.size() == a.size()) da += d_attention;
  const Vector d_logits = softmax_backward(a, da);
  dx += scorer_.backward(params_, grads, c.fuse.scorer, Matrix(d_logits));

  Vector d_query = Vector::Zero(cfg_.query_dim);
  for (std::size_t l = fusion_.size(); l-- > 0;) {
    const auto& layer = fusion_[l];
    const auto& lc = c.fuse.layers[l];
    const Matrix dsum2 = layer.ln2.backward(params_, grads, lc.ln2, dx);
    const auto ds = layer.self.backward(params_, grads, lc.self, dsum2);
    const Matrix dx1 = dsum2 + ds.dq + ds.dk + ds.dv;
    const Matrix dsum1 = layer.ln1.backward(params_, grads, lc.ln1, dx1);
    const auto dc = layer.cross.backward(params_, grads, lc.cross, dsum1);
    d_query += (dc.dk.colwise().sum() + dc.dv.colwise().sum()).transpose();
    dx = dsum1 + dc.dq;
  }

  // Encoder: s = MLP[g ⊕ f̂], g = BiGRU(f̂), f̂ = proj(f) + PE.
  const Matrix dcat = encoder_mlp_.backward(params_, grads, c.encode.mlp, dx);
  const Index gcols = 2 * cfg_.gru_hidden;
  Matrix dfhat = dcat.rightCols(cfg_.hidden);
  dfhat += gru_.backward(params_, grads, c.encode.gru, dcat.leftCols(gcols));
  proj_.backward(params_, grads, c.encode.f, dfhat);
  return d_query;
}

}  // namespace lfvg
