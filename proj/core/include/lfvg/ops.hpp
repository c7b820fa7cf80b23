#pragma once

#include <optional>

#include "lfvg/rng.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

/// 0.5·x² for |x| < 1, |x| − 0.5 otherwise.
double smooth_l1(double x);
/// Derivative of smooth_l1: x inside the unit band, sign(x) outside.
double smooth_l1_grad(double x);

/// softmax(v / temperature); shift-invariant, output on the simplex.
Vector softmax(const Vector& v, double temperature = 1.0);
/// Vector-Jacobian product of softmax(v / temperature) given its output y.
Vector softmax_backward(const Vector& y, const Vector& dy, double temperature = 1.0);

/// Row-wise softmax of a matrix, and its backward.
Matrix softmax_rows(const Matrix& x);
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

/// Sinusoidal encoding: PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(...).
Matrix positional_encoding(Index length, Index dim);

enum class Activation { linear, relu, tanh, sigmoid };

Matrix activate(const Matrix& x, Activation a);
/// dy ⊙ f'(x) expressed through the activation output y = f(x).
Matrix activate_backward(const Matrix& y, const Matrix& dy, Activation a);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One draw of the Gumbel-softmax relaxation.
struct GumbelSample {
  Vector noise;    ///< g added to the scores
  Vector soft;     ///< softmax((scores + g) / τ)
  Vector value;    ///< forward value: one-hot(argmax soft) in hard mode, else soft
  Index index = 0; ///< argmax of soft
  bool hard = true;
};

/// Gumbel-softmax with explicit noise. Passing a zero noise vector disables
/// the perturbation (deterministic selection for tests).
GumbelSample gumbel_softmax(const Vector& scores, double tau, bool hard, const Vector& noise);
/// Gumbel-softmax drawing its noise from `rng`.
GumbelSample gumbel_softmax(const Vector& scores, double tau, bool hard, Rng& rng);

/// Gradient w.r.t. the scores given the gradient w.r.t. the forward value.
/// In hard mode this is the straight-through estimator: the soft vector's
/// Jacobian is applied to the gradient of the one-hot value.
Vector gumbel_softmax_backward(const GumbelSample& s, const Vector& dvalue, double tau);

Vector draw_gumbel_noise(Index n, Rng& rng);

}  // namespace lfvg
