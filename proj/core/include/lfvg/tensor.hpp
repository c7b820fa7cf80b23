#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "lfvg/error.hpp"

namespace lfvg {

using Index = Eigen::Index;

/// Row-major dense matrix; the storage type behind every feature sequence.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Column vector.
using Vector = Eigen::VectorXd;
/// 1×n row, used for biases and single tokens.
using RowVector = Eigen::RowVectorXd;

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// A T×D sequence of feature vectors.
using FeatureMatrix = Matrix;

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
  if (!m.allFinite()) throw InvalidInputError(what + ": non-finite value");
}

inline void require_nonempty(const Matrix& m, const std::string& what) {
  if (m.rows() < 1 || m.cols() < 1) throw InvalidInputError(what + ": empty matrix");
}

inline double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace lfvg
