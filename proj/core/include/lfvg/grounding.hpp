#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfvg/interval.hpp"
#include "lfvg/layers.hpp"
#include "lfvg/params.hpp"

namespace lfvg {

struct GroundingConfig {
  Index video_dim = 32;
  Index query_dim = 32;
  Index hidden = 64;       ///< model width d (even)
  Index gru_hidden = 32;   ///< per direction
  Index gru_layers = 2;
  Index fusion_layers = 3;
  Index fusion_heads = 4;
  Index t_max = 128;
};

struct GroundingOutput {
  TemporalInterval prediction;
  Vector attention;  ///< a_t, on the simplex
  Matrix fused;      ///< final fused sequence s_att (T × d)
  double raw_start = 0.0;  ///< sigmoid outputs before ordering
  double raw_end = 0.0;
};

/// Records the sequence of stages a forward pass went through.
using ForwardTrace = std::vector<std::string>;

/// Video grounding network: projection + positional encoding + bi-GRU
/// encoder, cross/self-attention fusion with the language token, a temporal
/// attention scorer and an interval regression head.
class GroundingModel {
 public:
  struct EncodeCache {
    Matrix f;
    Matrix fhat;
    BiGru::Cache gru;
    Mlp::Cache mlp;
  };
  struct FusionLayerCache {
    MultiHeadAttention::Cache cross, self;
    LayerNorm::Cache ln1, ln2;
  };
  struct FuseCache {
    std::vector<FusionLayerCache> layers;
    Matrix sequence;  ///< final fused sequence
    Mlp::Cache scorer;
    Vector attention;
  };
  struct HeadCache {
    Matrix pooled;
    Mlp::Cache mlp;
    double u_start = 0.0, u_end = 0.0;
  };
  struct Cache {
    EncodeCache encode;
    FuseCache fuse;
    HeadCache head;
  };

  GroundingModel() = default;
  GroundingModel(const GroundingConfig& cfg, std::uint64_t seed);

  /// s = MLP[BiGRU(f̂) ⊕ f̂] with f̂ = proj(f) + PE. T rows in, T rows out.
  Matrix encode_video(const FeatureMatrix& f, EncodeCache* cache = nullptr) const;

  /// Fusion stack over the encoded sequence with the language feature as the
  /// single key/value token; returns the fused sequence and attention a.
  std::pair<Matrix, Vector> fuse(const Matrix& s, const Vector& query, FuseCache* cache = nullptr) const;

  /// Attention-pooled regression: sigmoid head, then (min, max).
  TemporalInterval predict_interval(const Matrix& fused, const Vector& attention,
                                    HeadCache* cache = nullptr) const;

  /// encode_video → fuse → predict_interval. The same path serves pseudo
  /// features during training and real text features at inference.
  GroundingOutput forward(const FeatureMatrix& f, const Vector& query, Cache* cache = nullptr,
                          ForwardTrace* trace = nullptr) const;

  /// Accumulates parameter gradients given ∂L/∂(t̂_s, t̂_e) and ∂L/∂a;
  /// returns ∂L/∂query.
  Vector backward(Vector& grads, const Cache& cache, double d_start, double d_end,
                  const Vector& d_attention) const;

  const GroundingConfig& config() const { return cfg_; }
  const Params& params() const { return params_; }
  Params& params() { return params_; }

 private:
  GroundingConfig cfg_;
  Params params_;
  Linear proj_;
  BiGru gru_;
  Mlp encoder_mlp_;
  struct FusionLayer {
    MultiHeadAttention cross, self;
    LayerNorm ln1, ln2;
  };
  std::vector<FusionLayer> fusion_;
  Mlp scorer_;
  Mlp head_;
};

}  // namespace lfvg
