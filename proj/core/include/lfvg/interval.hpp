#pragma once

#include <cmath>
#include <string>

#include "lfvg/error.hpp"

namespace lfvg {

/// A (start, end) pair in fractions of the video duration.
struct TemporalInterval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool valid() const {
    return std::isfinite(start) && std::isfinite(end) && 0.0 <= start && start <= end && end <= 1.0;
  }
  void validate(const std::string& what) const {
    if (!valid()) {
      throw InvalidInputError(what + ": invalid interval (" + std::to_string(start) + ", " +
                              std::to_string(end) + ")");
    }
  }
  friend bool operator==(const TemporalInterval&, const TemporalInterval&) = default;
};

}  // namespace lfvg
