#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ginv/error.hpp"

namespace ginv {

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = RowMajorMatrix<double>;

/// Dense row-major array of arbitrary rank. The trailing dimension is the
/// column axis of matrix(), all leading dimensions fold into rows.
template <typename Scalar>
class BasicTensor {
 public:
  using Shape = std::vector<Eigen::Index>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    check_shape();
    values_.setConstant(size_of(shape_), fill);
  }

  BasicTensor(Shape shape, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != size_of(shape_)) {
      throw Error(Errc::ShapeMismatch, "tensor value count does not match shape");
    }
  }

  /// Rejects NaN and infinities.
  static BasicTensor checked(Shape shape, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values) {
    if (!values.allFinite()) throw Error(Errc::NonFiniteValue, "tensor contains NaN or Inf");
    return BasicTensor(std::move(shape), std::move(values));
  }

  const Shape& shape() const { return shape_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index dim(std::size_t axis) const { return shape_.at(axis); }
  Eigen::Index size() const { return values_.size(); }

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& values() const { return values_; }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& values() { return values_; }

  template <typename... I>
  Scalar& operator()(I... idx) { return values_[offset({static_cast<Eigen::Index>(idx)...})]; }
  template <typename... I>
  Scalar operator()(I... idx) const {
    return values_[offset({static_cast<Eigen::Index>(idx)...})];
  }

  Eigen::Map<const RowMajorMatrix<Scalar>> matrix() const {
    return {values_.data(), rows(), shape_.back()};
  }
  Eigen::Map<RowMajorMatrix<Scalar>> matrix() { return {values_.data(), rows(), shape_.back()}; }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  static Eigen::Index size_of(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), Eigen::Index{1}, std::multiplies<>());
  }

  void check_shape() const {
    if (shape_.empty()) throw Error(Errc::ShapeMismatch, "tensor needs rank >= 1");
    for (auto d : shape_) {
      if (d < 1) throw Error(Errc::ShapeMismatch, "tensor dimensions must be positive");
    }
  }

  Eigen::Index rows() const { return values_.size() / shape_.back(); }

  Eigen::Index offset(std::initializer_list<Eigen::Index> idx) const {
    Eigen::Index off = 0;
    std::size_t axis = 0;
    for (auto i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  Shape shape_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values_;
};

using Tensor = BasicTensor<double>;

}  // namespace ginv
