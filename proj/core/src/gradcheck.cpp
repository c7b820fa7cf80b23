#include "lfvg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace lfvg {

double GradientReport::relative_error(Index i) const {
  const double a = analytic[i];
  const double n = numeric[i];
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

GradientReport check_gradients(const DifferentiableLoss& loss, const Vector& theta,
                               double epsilon, const Params* layout) {
  if (!(epsilon > 0.0)) throw InvalidInputError("check_gradients: epsilon must be positive");
  const LossAndGrad base = loss(theta, true);
  if (base.grad.size() != theta.size()) {
    throw InvalidInputError("check_gradients: analytic gradient has wrong size");
  }
  const LossAndGrad again = loss(theta, false);
  if (again.loss != base.loss) {
    throw ContractViolation("check_gradients: loss is not deterministic under pinned seeds");
  }

  GradientReport report;
  report.analytic = base.grad;
  report.numeric.resize(theta.size());
  Vector probe = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + epsilon;
    const double up = loss(probe, false).loss;
    probe[i] = theta[i] - epsilon;
    const double down = loss(probe, false).loss;
    probe[i] = theta[i];
    report.numeric[i] = (up - down) / (2.0 * epsilon);
  }
  if (layout) {
    if (layout->size() != theta.size()) throw InvalidInputError("check_gradients: layout size mismatch");
    for (const auto& spec : layout->specs()) report.parameters.push_back({spec.name, spec.offset, spec.size(), 0.0});
  } else {
    for (Index i = 0; i < theta.size(); ++i) report.parameters.push_back({"theta[" + std::to_string(i) + "]", i, 1, 0.0});
  }
  for (auto& p : report.parameters) {
    const auto a = report.analytic.segment(p.offset, p.size);
    const auto n = report.numeric.segment(p.offset, p.size);
    p.relative_error = (a - n).norm() / std::max({a.norm(), n.norm(), 1e-8});
    if (report.worst_parameter.empty() || p.relative_error > report.max_relative_error) {
      report.max_relative_error = p.relative_error;
      report.worst_parameter = p.name;
    }
  }
  return report;
}

std::string parameter_at(const Params& layout, Index i) {
  for (const auto& s : layout.specs()) {
    if (i >= s.offset && i < s.offset + s.size()) {
      const Index local = i - s.offset;
      return s.name + "[" + std::to_string(local / s.cols) + "," + std::to_string(local % s.cols) + "]";
    }
  }
  return "<out of range>";
}

}  // namespace lfvg
