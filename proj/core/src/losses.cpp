#include "lfvg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lfvg/ops.hpp"

namespace lfvg {

Vector make_target_mask(const TemporalInterval& interval, Index T) {
  interval.validate("make_target_mask");
  if (T < 1) throw InvalidInputError("make_target_mask: T must be positive");
  Vector mask = Vector::Zero(T);
  for (Index t = 0; t < T; ++t) {
    const double mid = (static_cast<double>(t) + 0.5) / static_cast<double>(T);
    if (interval.start <= mid && mid <= interval.end) mask[t] = 1.0;
  }
  if (mask.sum() == 0.0) {
    const double centre = 0.5 * (interval.start + interval.end);
    const auto t = std::clamp<Index>(static_cast<Index>(std::floor(centre * T)), 0, T - 1);
    mask[t] = 1.0;
  }
  return mask;
}

double loss_reg(const TemporalInterval& pred, const TemporalInterval& target) {
  return smooth_l1(pred.start - target.start) + smooth_l1(pred.end - target.end);
}

std::pair<double, double> loss_reg_grad(const TemporalInterval& pred, const TemporalInterval& target) {
  return {smooth_l1_grad(pred.start - target.start), smooth_l1_grad(pred.end - target.end)};
}

double loss_att(const Vector& attention, const Vector& mask) {
  if (attention.size() != mask.size()) throw InvalidInputError("loss_att: length mismatch");
  const double count = mask.sum();
  if (!(count > 0.0)) throw InvalidInputError("loss_att: empty mask");
  double s = 0.0;
  for (Index t = 0; t < attention.size(); ++t) {
    if (mask[t] != 0.0) s += mask[t] * std::log(std::max(attention[t], kAttentionFloor));
  }
  return -s / count;
}

Vector loss_att_grad(const Vector& attention, const Vector& mask) {
  const double count = mask.sum();
  Vector g = Vector::Zero(attention.size());
  for (Index t = 0; t < attention.size(); ++t) {
    if (mask[t] != 0.0 && attention[t] > kAttentionFloor) g[t] = -mask[t] / (attention[t] * count);
  }
  return g;
}

double total_loss(const TemporalInterval& pred, const TemporalInterval& target, const Vector& attention,
                  const Vector& mask, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInputError("total_loss: lambda must be nonnegative");
  return loss_reg(pred, target) + lambda * loss_att(attention, mask);
}

}  // namespace lfvg
