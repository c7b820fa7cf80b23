#include "lfvg/ops.hpp"

#include <cmath>

namespace lfvg {

double smooth_l1(double x) {
  if (!std::isfinite(x)) throw InvalidInputError("smooth_l1: non-finite input");
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_grad(double x) {
  if (!std::isfinite(x)) throw InvalidInputError("smooth_l1_grad: non-finite input");
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

Vector softmax(const Vector& v, double temperature) {
  if (!(temperature > 0.0)) throw InvalidInputError("softmax: temperature must be positive");
  if (v.size() == 0) throw InvalidInputError("softmax: empty input");
  require_finite(v.transpose(), "softmax");
  const Vector z = (v.array() - v.maxCoeff()) / temperature;
  Vector e = z.array().exp();
  return e / e.sum();
}

Vector softmax_backward(const Vector& y, const Vector& dy, double temperature) {
  const double dot = y.dot(dy);
  return (y.array() * (dy.array() - dot)) / temperature;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  const Vector dots = (y.array() * dy.array()).rowwise().sum();
  return y.array() * (dy.array().colwise() - dots.array());
}

Matrix positional_encoding(Index length, Index dim) {
  if (length < 1) throw InvalidInputError("positional_encoding: length must be positive");
  if (dim < 2 || dim % 2 != 0) throw InvalidInputError("positional_encoding: dim must be even");
  Matrix pe(length, dim);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / dim);
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix activate(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::linear:
      return x;
    case Activation::relu:
      return x.cwiseMax(0.0);
    case Activation::tanh:
      return x.array().tanh();
    case Activation::sigmoid:
      return x.unaryExpr([](double v) { return sigmoid(v); });
  }
  return x;
}

Matrix activate_backward(const Matrix& y, const Matrix& dy, Activation a) {
  switch (a) {
    case Activation::linear:
      return dy;
    case Activation::relu:
      return (y.array() > 0.0).select(dy, 0.0);
    case Activation::tanh:
      return dy.array() * (1.0 - y.array().square());
    case Activation::sigmoid:
      return dy.array() * y.array() * (1.0 - y.array());
  }
  return dy;
}

Vector draw_gumbel_noise(Index n, Rng& rng) {
  Vector g(n);
  for (Index i = 0; i < n; ++i) g[i] = rng.gumbel();
  return g;
}

GumbelSample gumbel_softmax(const Vector& scores, double tau, bool hard, const Vector& noise) {
  if (!(tau > 0.0)) throw InvalidInputError("gumbel_softmax: tau must be positive");
  if (noise.size() != scores.size()) throw InvalidInputError("gumbel_softmax: noise size mismatch");
  GumbelSample s;
  s.noise = noise;
  s.hard = hard;
  s.soft = softmax(scores + noise, tau);
  s.soft.maxCoeff(&s.index);
  if (hard) {
    s.value = Vector::Zero(scores.size());
    s.value[s.index] = 1.0;
  } else {
    s.value = s.soft;
  }
  return s;
}

GumbelSample gumbel_softmax(const Vector& scores, double tau, bool hard, Rng& rng) {
  return gumbel_softmax(scores, tau, hard, draw_gumbel_noise(scores.size(), rng));
}

Vector gumbel_softmax_backward(const GumbelSample& s, const Vector& dvalue, double tau) {
  return softmax_backward(s.soft, dvalue, tau);
}

}  // namespace lfvg
