#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lfvg/params.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;  ///< empty when not requested
};

/// A scalar loss of a flat parameter vector. When `with_grad` is true the
/// callee also returns its analytic gradient.
using DifferentiableLoss = std::function<LossAndGrad(const Vector& theta, bool with_grad)>;

struct ParameterError {
  std::string name;
  Index offset = 0;
  Index size = 0;
  double relative_error = 0.0;
};

struct GradientReport {
  Vector analytic;
  Vector numeric;
  /// One entry per named parameter (or per coordinate without a layout).
  std::vector<ParameterError> parameters;
  double max_relative_error = 0.0;
  std::string worst_parameter;

  /// |a − n| / max(|a|, |n|, 1e−8) for coordinate i.
  double relative_error(Index i) const;
};

/// Central differences (f(θ+ε) − f(θ−ε)) / 2ε for every coordinate of θ,
/// compared against the analytic gradient. With a layout, the error of each
/// named parameter is ‖a − n‖ / max(‖a‖, ‖n‖, 1e−8) over its entries;
/// otherwise every coordinate is scored on its own. Throws ContractViolation
/// if the loss is not reproducible at θ.
GradientReport check_gradients(const DifferentiableLoss& loss, const Vector& theta,
                               double epsilon = 1e-5, const Params* layout = nullptr);

/// Name of the parameter owning flat index `i` in `layout`, for diagnostics.
std::string parameter_at(const Params& layout, Index i);

}  // namespace lfvg
