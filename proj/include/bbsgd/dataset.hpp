#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <utility>

namespace bbsgd {

using Index = Eigen::Index;

template <std::floating_point Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Samples are stored as the rows of a row-major sparse matrix. Column
/// indices are 0-based and strictly increasing within a row.
template <std::floating_point Scalar>
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

/// n labelled samples a_i in R^d with labels b_i in {-1, +1}.
///
/// Immutable after construction; safe to share read-only between runs.
template <std::floating_point Scalar>
class Dataset {
 public:
  using RowIterator = typename SparseRows<Scalar>::InnerIterator;

  Dataset(SparseRows<Scalar> features, Vector<Scalar> labels)
      : features_(std::move(features)), labels_(std::move(labels)) {
    features_.makeCompressed();
    if (features_.rows() < 1) throw std::invalid_argument("empty dataset");
    if (features_.cols() < 1) throw std::invalid_argument("dataset dimension must be >= 1");
    if (labels_.size() != features_.rows())
      throw std::invalid_argument("label count " + std::to_string(labels_.size()) +
                                  " does not match sample count " +
                                  std::to_string(features_.rows()));
    for (Index i = 0; i < labels_.size(); ++i) {
      if (labels_[i] != Scalar(1) && labels_[i] != Scalar(-1))
        throw std::invalid_argument("label of sample " + std::to_string(i) + " is not +1/-1");
    }
    for (Index k = 0; k < features_.nonZeros(); ++k) {
      if (!std::isfinite(features_.valuePtr()[k]))
        throw std::invalid_argument("non-finite feature value");
    }
  }

  Index size() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }
  Index nonzeros() const noexcept { return features_.nonZeros(); }

  const SparseRows<Scalar>& features() const noexcept { return features_; }
  const Vector<Scalar>& labels() const noexcept { return labels_; }

  Scalar label(Index i) const { return labels_[i]; }
  RowIterator row(Index i) const { return RowIterator(features_, i); }

  /// a_i^T x for a dense x of length dim().
  template <typename Derived>
  Scalar dot(Index i, const Eigen::MatrixBase<Derived>& x) const {
    Scalar acc(0);
    for (RowIterator it(features_, i); it; ++it) acc += it.value() * x.coeff(it.index());
    return acc;
  }

  /// x += alpha * a_i
  template <typename Derived>
  void axpy(Index i, Scalar alpha, Eigen::MatrixBase<Derived>& x) const {
    for (RowIterator it(features_, i); it; ++it) x.coeffRef(it.index()) += alpha * it.value();
  }

  Scalar squared_norm(Index i) const {
    Scalar acc(0);
    for (RowIterator it(features_, i); it; ++it) acc += it.value() * it.value();
    return acc;
  }

  void check_index(Index i) const {
    if (i < 0 || i >= size())
      throw std::out_of_range("sample index " + std::to_string(i) + " outside [0, " +
                              std::to_string(size()) + ")");
  }

 private:
  SparseRows<Scalar> features_;
  Vector<Scalar> labels_;
};

}  // namespace bbsgd
