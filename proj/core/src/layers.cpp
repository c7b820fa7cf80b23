#include "lfvg/layers.hpp"

#include <cmath>

namespace lfvg {

// ---------------------------------------------------------------- Linear

Linear::Linear(Params& p, const std::string& name, Index in, Index out, bool bias)
    : in_(in), out_(out), has_bias_(bias) {
  w_ = p.add(name + ".weight", in, out, ParamInit::glorot);
  if (bias) b_ = p.add(name + ".bias", 1, out, ParamInit::zeros);
}

Matrix Linear::forward(const Params& p, const Matrix& x) const {
  if (x.cols() != in_) {
    throw InvalidInputError("linear: input has " + std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(in_));
  }
  Matrix y = x * p.view(w_);
  if (has_bias_) y.rowwise() += p.view(b_).row(0);
  return y;
}

Matrix Linear::backward(const Params& p, Vector& g, const Matrix& x, const Matrix& dy) const {
  p.grad_view(g, w_).noalias() += x.transpose() * dy;
  if (has_bias_) p.grad_view(g, b_).row(0) += dy.colwise().sum();
  return dy * p.view(w_).transpose();
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(Params& p, const std::string& name, const std::vector<Index>& sizes, Activation hidden,
         Activation output, bool output_bias)
    : hidden_(hidden), output_(output) {
  if (sizes.size() < 2) throw InvalidInputError("mlp " + name + ": needs at least two sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool bias = output_bias || i + 2 < sizes.size();
    layers_.emplace_back(p, name + "." + std::to_string(i), sizes[i], sizes[i + 1], bias);
  }
}

Matrix Mlp::forward(const Params& p, const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix y = activate(layers_[l].forward(p, h), act(l));
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(y);
    }
    h = std::move(y);
  }
  return h;
}

Matrix Mlp::backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const {
  Matrix d = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix dz = activate_backward(cache.outputs[l], d, act(l));
    d = layers_[l].backward(p, g, cache.inputs[l], dz);
  }
  return d;
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(Params& p, const std::string& name, Index dim, bool shift)
    : dim_(dim), has_shift_(shift) {
  gain_ = p.add(name + ".gain", 1, dim, ParamInit::ones);
  if (shift) shift_ = p.add(name + ".shift", 1, dim, ParamInit::zeros);
}

Matrix LayerNorm::forward(const Params& p, const Matrix& x, Cache* cache) const {
  if (x.cols() != dim_) throw InvalidInputError("layer_norm: dimension mismatch");
  const Vector mean = x.rowwise().mean();
  Matrix xc = x.colwise() - mean;
  const Vector var = xc.array().square().rowwise().mean();
  const Vector inv = (var.array() + kEps).rsqrt();
  Matrix xhat = xc.array().colwise() * inv.array();
  Matrix y = xhat.array().rowwise() * p.view(gain_).row(0).array();
  if (has_shift_) y.rowwise() += p.view(shift_).row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv;
  }
  return y;
}

Matrix LayerNorm::backward(const Params& p, Vector& g, const Cache& cache, const Matrix& dy) const {
  p.grad_view(g, gain_).row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  if (has_shift_) p.grad_view(g, shift_).row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * p.view(gain_).row(0).array();
  const double n = static_cast<double>(dim_);
  const Vector sum_d = dxhat.rowwise().sum();
  const Vector sum_dx = (dxhat.array() * cache.xhat.array()).rowwise().sum();
  Matrix dx = n * dxhat.array();
  dx.colwise() -= sum_d;
  dx.array() -= cache.xhat.array().colwise() * sum_dx.array();
  dx.array().colwise() *= (cache.inv_std.array() / n);
  return dx;
}

// ---------------------------------------------------------------- MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(Params& p, const std::string& name, Index query_dim,
                                       Index key_dim, Index value_dim, Index model_dim, Index heads,
                                       bool single_key)
    : model_dim_(model_dim), heads_(heads), single_key_(single_key) {
  if (heads < 1 || model_dim % heads != 0) {
    throw InvalidInputError("attention " + name + ": model dim not divisible by heads");
  }
  if (!single_key) {
    wq_ = Linear(p, name + ".query", query_dim, model_dim);
    // A key bias shifts every score of a query row equally, so softmax ignores it.
    wk_ = Linear(p, name + ".key", key_dim, model_dim, false);
  }
  wv_ = Linear(p, name + ".value", value_dim, model_dim);
  wo_ = Linear(p, name + ".out", model_dim, model_dim);
}

Matrix MultiHeadAttention::forward(const Params& p, const Matrix& xq, const Matrix& xk,
                                   const Matrix& xv, Cache* cache) const {
  if (xk.rows() != xv.rows()) throw InvalidInputError("attention: key/value row counts differ");
  if (xq.rows() < 1 || xk.rows() < 1) throw InvalidInputError("attention: empty input");
  if (single_key_ && xk.rows() != 1) throw InvalidInputError("attention: single-key block given several keys");
  Matrix q, k;
  if (!single_key_) {
    q = wq_.forward(p, xq);
    k = wk_.forward(p, xk);
  }
  Matrix v = wv_.forward(p, xv);
  const Index dk = model_dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix concat(xq.rows(), model_dim_);
  std::vector<Matrix> weights;
  weights.reserve(heads_);
  for (Index h = 0; h < heads_; ++h) {
    Matrix a = single_key_ ? Matrix(Matrix::Ones(xq.rows(), 1))
                           : softmax_rows(scale * q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose());
    concat.middleCols(h * dk, dk).noalias() = a * v.middleCols(h * dk, dk);
    weights.push_back(std::move(a));
  }
  Matrix out = wo_.forward(p, concat);
  if (cache) {
    cache->xq = xq;
    cache->xk = xk;
    cache->xv = xv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->weights = std::move(weights);
    cache->concat = std::move(concat);
  }
  return out;
}

MultiHeadAttention::InputGrads MultiHeadAttention::backward(const Params& p, Vector& g,
                                                            const Cache& c, const Matrix& dy) const {
  const Matrix dconcat = wo_.backward(p, g, c.concat, dy);
  const Index dk = model_dim_ / heads_;
  if (single_key_) {
    InputGrads out;
    out.dq = Matrix::Zero(c.xq.rows(), c.xq.cols());
    out.dk = Matrix::Zero(c.xk.rows(), c.xk.cols());
    out.dv = wv_.backward(p, g, c.xv, dconcat.colwise().sum());
    return out;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix dq(c.q.rows(), c.q.cols()), dkm(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (Index h = 0; h < heads_; ++h) {
    const auto dout = dconcat.middleCols(h * dk, dk);
    const Matrix& a = c.weights[h];
    const Matrix da = dout * c.v.middleCols(h * dk, dk).transpose();
    dv.middleCols(h * dk, dk).noalias() = a.transpose() * dout;
    const Matrix ds = scale * softmax_rows_backward(a, da);
    dq.middleCols(h * dk, dk).noalias() = ds * c.k.middleCols(h * dk, dk);
    dkm.middleCols(h * dk, dk).noalias() = ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  InputGrads out;
  out.dq = wq_.backward(p, g, c.xq, dq);
  out.dk = wk_.backward(p, g, c.xk, dkm);
  out.dv = wv_.backward(p, g, c.xv, dv);
  return out;
}

// ---------------------------------------------------------------- GRU

GruDirection::GruDirection(Params& p, const std::string& name, Index in, Index hidden)
    : in_(in), hidden_(hidden) {
  wx_ = p.add(name + ".input_weight", in, 3 * hidden, ParamInit::glorot);
  bx_ = p.add(name + ".input_bias", 1, 3 * hidden, ParamInit::zeros);
  wh_ = p.add(name + ".hidden_weight", hidden, 3 * hidden, ParamInit::glorot);
  bh_ = p.add(name + ".hidden_bias", 1, 3 * hidden, ParamInit::zeros);
}

Matrix GruDirection::forward(const Params& p, const Matrix& x, bool reverse, Cache* cache) const {
  if (x.rows() < 1) throw InvalidInputError("gru: empty sequence");
  if (x.cols() != in_) throw InvalidInputError("gru: input dimension mismatch");
  const Index T = x.rows();
  const Index H = hidden_;
  Matrix xp = x * p.view(wx_);
  xp.rowwise() += p.view(bx_).row(0);
  const auto wh = p.view(wh_);
  const RowVector bh = p.view(bh_).row(0);

  Matrix out(T, H);
  if (cache) {
    cache->x = x;
    cache->reverse = reverse;
    cache->h_prev.resize(T, H);
    cache->r.resize(T, H);
    cache->z.resize(T, H);
    cache->n.resize(T, H);
    cache->hn.resize(T, H);
  }
  RowVector h = RowVector::Zero(H);
  for (Index s = 0; s < T; ++s) {
    const Index t = reverse ? T - 1 - s : s;
    RowVector hp = h * wh;
    hp += bh;
    const RowVector r =
        (xp.row(t).segment(0, H) + hp.segment(0, H)).unaryExpr([](double v) { return sigmoid(v); });
    const RowVector z =
        (xp.row(t).segment(H, H) + hp.segment(H, H)).unaryExpr([](double v) { return sigmoid(v); });
    const RowVector hn = hp.segment(2 * H, H);
    const RowVector n =
        (xp.row(t).segment(2 * H, H).array() + r.array() * hn.array()).tanh().matrix();
    const RowVector hnew = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
    if (cache) {
      cache->h_prev.row(t) = h;
      cache->r.row(t) = r;
      cache->z.row(t) = z;
      cache->n.row(t) = n;
      cache->hn.row(t) = hn;
    }
    out.row(t) = hnew;
    h = hnew;
  }
  return out;
}

Matrix GruDirection::backward(const Params& p, Vector& g, const Cache& c, const Matrix& dh_out) const {
  const Index T = c.x.rows();
  const Index H = hidden_;
  const auto wh = p.view(wh_);
  Matrix dxp(T, 3 * H);
  Matrix dhp_all(T, 3 * H);
  RowVector dh_next = RowVector::Zero(H);
  for (Index s = T; s-- > 0;) {
    const Index t = c.reverse ? T - 1 - s : s;
    const RowVector dh = dh_out.row(t) + dh_next;
    const auto r = c.r.row(t).array();
    const auto z = c.z.row(t).array();
    const auto n = c.n.row(t).array();
    const auto hprev = c.h_prev.row(t).array();
    const RowVector dn = (dh.array() * (1.0 - z)).matrix();
    const RowVector dz = (dh.array() * (hprev - n)).matrix();
    const RowVector dn_pre = (dn.array() * (1.0 - n.square())).matrix();
    const RowVector dr = (dn_pre.array() * c.hn.row(t).array()).matrix();
    const RowVector dr_pre = (dr.array() * r * (1.0 - r)).matrix();
    const RowVector dz_pre = (dz.array() * z * (1.0 - z)).matrix();
    dxp.row(t) << dr_pre, dz_pre, dn_pre;
    RowVector dhp(3 * H);
    dhp << dr_pre, dz_pre, (dn_pre.array() * r).matrix();
    dhp_all.row(t) = dhp;
    dh_next = (dh.array() * z).matrix() + dhp * wh.transpose();
  }
  p.grad_view(g, wh_).noalias() += c.h_prev.transpose() * dhp_all;
  p.grad_view(g, bh_).row(0) += dhp_all.colwise().sum();
  p.grad_view(g, wx_).noalias() += c.x.transpose() * dxp;
  p.grad_view(g, bx_).row(0) += dxp.colwise().sum();
  return dxp * p.view(wx_).transpose();
}

BiGru::BiGru(Params& p, const std::string& name, Index in, Index hidden, Index layers)
    : hidden_(hidden) {
  if (layers < 1) throw InvalidInputError("bigru: needs at least one layer");
  for (Index l = 0; l < layers; ++l) {
    const Index layer_in = l == 0 ? in : 2 * hidden;
    fwd_.emplace_back(p, name + "." + std::to_string(l) + ".fwd", layer_in, hidden);
    bwd_.emplace_back(p, name + "." + std::to_string(l) + ".bwd", layer_in, hidden);
  }
}

Matrix BiGru::forward(const Params& p, const Matrix& x, Cache* cache) const {
  if (x.rows() < 1) throw InvalidInputError("bigru: empty sequence");
  if (cache) {
    cache->fwd.assign(fwd_.size(), {});
    cache->bwd.assign(bwd_.size(), {});
  }
  Matrix h = x;
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    Matrix out(h.rows(), 2 * hidden_);
    out.leftCols(hidden_) = fwd_[l].forward(p, h, false, cache ? &cache->fwd[l] : nullptr);
    out.rightCols(hidden_) = bwd_[l].forward(p, h, true, cache ? &cache->bwd[l] : nullptr);
    h = std::move(out);
  }
  return h;
}

Matrix BiGru::backward(const Params& p, Vector& g, const Cache& c, const Matrix& dy) const {
  Matrix d = dy;
  for (std::size_t l = fwd_.size(); l-- > 0;) {
    Matrix dx = fwd_[l].backward(p, g, c.fwd[l], d.leftCols(hidden_));
    dx += bwd_[l].backward(p, g, c.bwd[l], d.rightCols(hidden_));
    d = std::move(dx);
  }
  return d;
}

// ---------------------------------------------------------------- TransformerEncoderLayer

TransformerEncoderLayer::TransformerEncoderLayer(Params& p, const std::string& name, Index dim,
                                                 Index heads, Index ffn_dim, bool output_shift)
    : attn_(p, name + ".attn", dim, dim, dim, dim, heads),
      ln1_(p, name + ".ln1", dim),
      ln2_(p, name + ".ln2", dim, output_shift),
      ffn_(p, name + ".ffn", {dim, ffn_dim, dim}, Activation::relu, Activation::linear) {}

Matrix TransformerEncoderLayer::forward(const Params& p, const Matrix& x, Cache* cache) const {
  const Matrix a = attn_.forward(p, x, x, x, cache ? &cache->attn : nullptr);
  const Matrix x1 = ln1_.forward(p, x + a, cache ? &cache->ln1 : nullptr);
  const Matrix f = ffn_.forward(p, x1, cache ? &cache->ffn : nullptr);
  return ln2_.forward(p, x1 + f, cache ? &cache->ln2 : nullptr);
}

Matrix TransformerEncoderLayer::backward(const Params& p, Vector& g, const Cache& c,
                                         const Matrix& dy) const {
  const Matrix dsum2 = ln2_.backward(p, g, c.ln2, dy);
  const Matrix dx1 = dsum2 + ffn_.backward(p, g, c.ffn, dsum2);
  const Matrix dsum1 = ln1_.backward(p, g, c.ln1, dx1);
  const auto da = attn_.backward(p, g, c.attn, dsum1);
  return dsum1 + da.dq + da.dk + da.dv;
}

}  // namespace lfvg
