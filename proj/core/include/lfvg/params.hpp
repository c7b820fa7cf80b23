#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfvg/tensor.hpp"

namespace lfvg {

enum class ParamInit { glorot, zeros, ones };

struct ParamSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;
  ParamInit init = ParamInit::glorot;

  Index size() const { return rows * cols; }
};

/// Index of a parameter inside a Params layout.
struct ParamHandle {
  std::size_t index = static_cast<std::size_t>(-1);
};

/// Named weight matrices stored back to back in one flat vector.
///
/// Blocks register their weights at construction and keep the returned
/// handles; forward passes read through `view`, backward passes write into a
/// gradient vector of the same layout through `grad_view`. Keeping values and
/// gradients flat makes the optimizer, finite-difference checks and
/// serialization layout-agnostic.
class Params {
 public:
  Params() = default;

  ParamHandle add(const std::string& name, Index rows, Index cols, ParamInit init);

  /// Fills every parameter from its init rule: glorot uniform in
  /// ±sqrt(6/(fan_in+fan_out)), zeros, or ones.
  void initialize(std::uint64_t seed);

  ConstMatrixMap view(ParamHandle h) const {
    const auto& s = specs_[h.index];
    return ConstMatrixMap(values_.data() + s.offset, s.rows, s.cols);
  }
  MatrixMap mutable_view(ParamHandle h) {
    const auto& s = specs_[h.index];
    return MatrixMap(values_.data() + s.offset, s.rows, s.cols);
  }

  MatrixMap grad_view(Vector& grads, ParamHandle h) const {
    const auto& s = specs_[h.index];
    return MatrixMap(grads.data() + s.offset, s.rows, s.cols);
  }

  Vector zero_grads() const { return Vector::Zero(values_.size()); }

  const std::vector<ParamSpec>& specs() const { return specs_; }
  const ParamSpec& spec(ParamHandle h) const { return specs_[h.index]; }
  ParamHandle find(const std::string& name) const;

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  std::uint64_t init_seed() const { return init_seed_; }

  /// FNV-1a over the raw bytes of every value; used to assert immutability.
  std::uint64_t hash() const;

 private:
  std::vector<ParamSpec> specs_;
  std::unordered_map<std::string, std::size_t> by_name_;
  Vector values_;
  std::uint64_t init_seed_ = 0;
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace lfvg
