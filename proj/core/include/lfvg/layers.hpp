#pragma once

#include <string>
#include <vector>

#include "lfvg/ops.hpp"
#include "lfvg/params.hpp"
#include "lfvg/tensor.hpp"

// Differentiable blocks. Each block registers its weights in a Params layout
// at construction and exposes
//   forward(params, inputs...)        -> output (+ cache for blocks that need one)
//   backward(params, grads, cache, dy) -> input gradients, accumulating into grads
// Forward never mutates params, so a block may be shared across threads.

namespace lfvg {

class Linear {
 public:
  Linear() = default;
  /// Without a bias when `bias` is false (for projections whose bias cannot
  /// affect the output, e.g. attention keys).
  Linear(Params& p, const std::string& name, Index in, Index out, bool bias = true);

  Matrix forward(const Params& p, const Matrix& x) const;
  Matrix backward(const Params& p, Vector& g, const Matrix& x, const Matrix& dy) const;

  Index in_dim() const { return in_; }
  Index out_dim() const { return out_; }
  ParamHandle weight() const { return w_; }
  ParamHandle bias() const { return b_; }
  bool has_bias() const { return has_bias_; }

 private:
  Index in_ = 0;
  Index out_ = 0;
  ParamHandle w_;
  ParamHandle b_;
  bool has_bias_ = true;
};

/// Affine-activation stack. Hidden layers use `hidden`; the last layer uses
/// `output` (linear unless the caller asks for a squashing).
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
  };

  Mlp() = default;
  Mlp(Params& p, const std::string& name, const std::vector<Index>& sizes,
      Activation hidden = Activation::relu, Activation output = Activation::linear,
      bool output_bias = true);

  Matrix forward(const Params& p, const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const;

  const std::vector<Linear>& layers() const { return layers_; }
  Index in_dim() const { return layers_.front().in_dim(); }
  Index out_dim() const { return layers_.back().out_dim(); }

 private:
  Activation act(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }
  std::vector<Linear> layers_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::linear;
};

/// Row-wise layer normalization with learned gain and shift.
class LayerNorm {
 public:
  struct Cache {
    Matrix xhat;
    Vector inv_std;
  };

  LayerNorm() = default;
  LayerNorm(Params& p, const std::string& name, Index dim, bool shift = true);

  Matrix forward(const Params& p, const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const;

  static constexpr double kEps = 1e-5;

 private:
  Index dim_ = 0;
  bool has_shift_ = true;
  ParamHandle gain_;
  ParamHandle shift_;
};

/// Multi-head scaled dot-product attention with input and output projections:
/// per head softmax(Q_h K_hᵀ / sqrt(d_k)) V_h, heads concatenated, then Wo.
class MultiHeadAttention {
 public:
  struct Cache {
    Matrix xq, xk, xv;
    Matrix q, k, v;
    std::vector<Matrix> weights;  ///< per head, rows(Q) × rows(K)
    Matrix concat;
  };
  struct InputGrads {
    Matrix dq, dk, dv;
  };

  MultiHeadAttention() = default;
  /// With `single_key` the block accepts exactly one key/value row. Its
  /// attention weights are then identically 1, so no query or key
  /// projection is created.
  MultiHeadAttention(Params& p, const std::string& name, Index query_dim, Index key_dim,
                     Index value_dim, Index model_dim, Index heads, bool single_key = false);

  Matrix forward(const Params& p, const Matrix& xq, const Matrix& xk, const Matrix& xv,
                 Cache* cache = nullptr) const;
  InputGrads backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const;

  Index heads() const { return heads_; }
  Index model_dim() const { return model_dim_; }
  bool single_key() const { return single_key_; }
  const Linear& query_proj() const { return wq_; }
  const Linear& key_proj() const { return wk_; }
  const Linear& value_proj() const { return wv_; }
  const Linear& output_proj() const { return wo_; }

 private:
  Index model_dim_ = 0;
  Index heads_ = 1;
  bool single_key_ = false;
  Linear wq_, wk_, wv_, wo_;
};

/// One direction of a GRU layer (gate order r, z, n):
///   r = σ(x Wx_r + bx_r + h Wh_r + bh_r)
///   z = σ(x Wx_z + bx_z + h Wh_z + bh_z)
///   n = tanh(x Wx_n + bx_n + r ⊙ (h Wh_n + bh_n))
///   h' = (1 − z) ⊙ n + z ⊙ h,  h_0 = 0
class GruDirection {
 public:
  struct Cache {
    Matrix x;
    Matrix h_prev, r, z, n, hn;  ///< indexed by time position
    bool reverse = false;
  };

  GruDirection() = default;
  GruDirection(Params& p, const std::string& name, Index in, Index hidden);

  Matrix forward(const Params& p, const Matrix& x, bool reverse, Cache* cache = nullptr) const;
  Matrix backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dh) const;

  Index hidden() const { return hidden_; }
  ParamHandle input_weight() const { return wx_; }
  ParamHandle input_bias() const { return bx_; }
  ParamHandle hidden_weight() const { return wh_; }
  ParamHandle hidden_bias() const { return bh_; }

 private:
  Index in_ = 0;
  Index hidden_ = 0;
  ParamHandle wx_, bx_, wh_, bh_;
};

/// Stacked bidirectional GRU; the output at position t is the concatenation
/// [forward state | backward state] of the top layer (T × 2·hidden).
class BiGru {
 public:
  struct Cache {
    std::vector<GruDirection::Cache> fwd, bwd;
  };

  BiGru() = default;
  BiGru(Params& p, const std::string& name, Index in, Index hidden, Index layers);

  Matrix forward(const Params& p, const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const;

  Index hidden() const { return hidden_; }
  Index layers() const { return static_cast<Index>(fwd_.size()); }
  const GruDirection& forward_direction(Index layer) const { return fwd_[layer]; }
  const GruDirection& backward_direction(Index layer) const { return bwd_[layer]; }

 private:
  Index hidden_ = 0;
  std::vector<GruDirection> fwd_, bwd_;
};

/// Post-norm transformer encoder layer: x1 = LN(x + SelfAttn(x)); y = LN(x1 + FFN(x1)).
class TransformerEncoderLayer {
 public:
  struct Cache {
    MultiHeadAttention::Cache attn;
    LayerNorm::Cache ln1, ln2;
    Mlp::Cache ffn;
  };

  TransformerEncoderLayer() = default;
  /// Without `output_shift` the final LayerNorm has no shift, for a last
  /// layer feeding a bias-free score under a softmax.
  TransformerEncoderLayer(Params& p, const std::string& name, Index dim, Index heads, Index ffn_dim,
                          bool output_shift = true);

  Matrix forward(const Params& p, const Matrix& x, Cache* cache = nullptr) const;
  Matrix backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const;

 private:
  MultiHeadAttention attn_;
  LayerNorm ln1_, ln2_;
  Mlp ffn_;
};

}  // namespace lfvg
