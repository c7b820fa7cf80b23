#pragma once

#include <vector>

#include "lfvg/interval.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

/// ã_t = 1 iff start ≤ (t + 0.5)/T ≤ end; when no midpoint falls inside, the
/// segment containing the interval's midpoint is marked instead.
Vector make_target_mask(const TemporalInterval& interval, Index T);

/// smooth_l1(t̂_s − t̃_s) + smooth_l1(t̂_e − t̃_e).
double loss_reg(const TemporalInterval& pred, const TemporalInterval& target);
/// ∂loss_reg/∂(t̂_s, t̂_e).
std::pair<double, double> loss_reg_grad(const TemporalInterval& pred, const TemporalInterval& target);

inline constexpr double kAttentionFloor = 1e-12;

/// −Σ ã_t log a_t / Σ ã_t with a clamped below at 1e−12.
double loss_att(const Vector& attention, const Vector& mask);
/// ∂loss_att/∂a (zero where the clamp is active).
Vector loss_att_grad(const Vector& attention, const Vector& mask);

/// loss_reg + λ·loss_att.
double total_loss(const TemporalInterval& pred, const TemporalInterval& target, const Vector& attention,
                  const Vector& mask, double lambda);

}  // namespace lfvg
