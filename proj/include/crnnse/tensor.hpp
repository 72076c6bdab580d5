// include/crnnse/tensor.hpp

// Copyright 2026 The crnnse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crnnse/errors.hpp"

namespace crnnse {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense n-dimensional array stored row-major, with an optional gradient slot.
///
/// The gradient is absent until a backward pass (or zero_grad()) allocates it;
/// once present it always has the same number of elements as the data.
template <typename Scalar>
class Tensor {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = RowMatrix<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    check_shape(shape_);
    data_ = VectorType::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, VectorType data, bool requires_grad = false)
      : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                           " values but shape " + shape_string(shape_) + " needs " +
                           std::to_string(shape_size(shape_)));
    }
  }

  /// Copies a 2-D Eigen expression into a rows x cols tensor.
  template <typename Derived>
  static Tensor from_matrix(const Eigen::MatrixBase<Derived>& m, bool requires_grad = false) {
    Tensor t({m.rows(), m.cols()}, requires_grad);
    t.matrix() = m.template cast<Scalar>();
    return t;
  }

  static Tensor scalar(Scalar value) {
    Tensor t({1});
    t.data_(0) = value;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  VectorType& data() { return data_; }
  const VectorType& data() const { return data_; }
  Scalar item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    return data_(0);
  }

  /// Row-major view with the first axis as rows and the remaining axes flattened.
  Eigen::Map<MatrixType> matrix() { return {data_.data(), rows(), cols()}; }
  Eigen::Map<const MatrixType> matrix() const { return {data_.data(), rows(), cols()}; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.size() == data_.size() && data_.size() > 0; }
  VectorType& grad() {
    if (!has_grad()) grad_ = VectorType::Zero(data_.size());
    return grad_;
  }
  const VectorType& grad() const { return grad_; }
  void zero_grad() { grad_ = VectorType::Zero(data_.size()); }
  void clear_grad() { grad_.resize(0); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_, data_.template cast<Other>(), requires_grad_);
    return out;
  }

  bool all_finite() const { return data_.allFinite() && (!has_grad() || grad_.allFinite()); }

 private:
  Index rows() const { return shape_.empty() ? 1 : shape_[0]; }
  Index cols() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] <= 0) {
        throw DimensionError("axis " + std::to_string(i) + " of shape " + shape_string(shape) +
                             " is not positive");
      }
    }
  }

  Shape shape_;
  VectorType data_;
  VectorType grad_;
  bool requires_grad_ = false;
};

}  // namespace crnnse
