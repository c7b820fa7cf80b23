#include "lfvg/params.hpp"

#include <cmath>

#include "lfvg/rng.hpp"

namespace lfvg {

ParamHandle Params::add(const std::string& name, Index rows, Index cols, ParamInit init) {
  if (rows < 1 || cols < 1) throw InvalidInputError("parameter " + name + ": empty shape");
  if (by_name_.count(name)) throw InvalidInputError("parameter " + name + ": duplicate name");
  ParamSpec spec{name, rows, cols, values_.size(), init};
  values_.conservativeResize(values_.size() + spec.size());
  values_.segment(spec.offset, spec.size()).setZero();
  by_name_[name] = specs_.size();
  specs_.push_back(spec);
  return ParamHandle{specs_.size() - 1};
}

void Params::initialize(std::uint64_t seed) {
  init_seed_ = seed;
  Rng rng(seed);
  for (const auto& s : specs_) {
    auto seg = values_.segment(s.offset, s.size());
    switch (s.init) {
      case ParamInit::zeros:
        seg.setZero();
        break;
      case ParamInit::ones:
        seg.setOnes();
        break;
      case ParamInit::glorot: {
        const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
        for (Index i = 0; i < seg.size(); ++i) seg[i] = rng.uniform(-limit, limit);
        break;
      }
    }
  }
}

ParamHandle Params::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InvalidInputError("unknown parameter " + name);
  return ParamHandle{it->second};
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Params::hash() const {
  return fnv1a(values_.data(), static_cast<std::size_t>(values_.size()) * sizeof(double));
}

}  // namespace lfvg
