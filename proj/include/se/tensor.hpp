#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "se/common.hpp"

namespace se {

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

// Dense row-major tensor of arbitrary rank. The flat buffer is the canonical
// representation; matrix views are Eigen maps over it.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    SE_CHECK(!shape_.empty(), "tensor rank must be >= 1");
    for (Index d : shape_) SE_CHECK(d >= 1, "tensor dims must be >= 1, got ", shape_str(shape_));
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), S(0));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, S value) {
    Tensor t(std::move(shape));
    t.flat().setConstant(value);
    return t;
  }

  static Tensor scalar(S value) { return full({1}, value); }

  static Tensor from_values(Shape shape, std::vector<S> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    SE_CHECK(!t.shape_.empty(), "tensor rank must be >= 1");
    SE_CHECK(shape_size(t.shape_) == static_cast<Index>(values.size()),
             "value count ", values.size(), " does not match shape ", shape_str(t.shape_));
    t.data_ = std::move(values);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  Eigen::Map<ArrayX<S>> flat() { return {data(), size()}; }
  Eigen::Map<const ArrayX<S>> flat() const { return {data(), size()}; }

  Eigen::Map<MatrixRM<S>> mat(Index rows, Index cols) {
    SE_CHECK(rows * cols == size(), "matrix view ", rows, "x", cols, " does not cover tensor ",
             shape_str(shape_));
    return {data(), rows, cols};
  }
  Eigen::Map<const MatrixRM<S>> mat(Index rows, Index cols) const {
    SE_CHECK(rows * cols == size(), "matrix view ", rows, "x", cols, " does not cover tensor ",
             shape_str(shape_));
    return {data(), rows, cols};
  }

  // Rank-2 view of a rank-2 tensor.
  Eigen::Map<MatrixRM<S>> mat() {
    SE_CHECK(rank() == 2, "mat() requires rank 2, got ", shape_str(shape_));
    return mat(dim(0), dim(1));
  }
  Eigen::Map<const MatrixRM<S>> mat() const {
    SE_CHECK(rank() == 2, "mat() requires rank 2, got ", shape_str(shape_));
    return mat(dim(0), dim(1));
  }

  // View collapsing every dimension after the first: (d0, rest). This is the
  // reshape used by spectral normalization of conv kernels.
  Eigen::Map<MatrixRM<S>> as_2d() { return mat(dim(0), size() / dim(0)); }
  Eigen::Map<const MatrixRM<S>> as_2d() const { return mat(dim(0), size() / dim(0)); }

  // single-index access is flat, any rank; multi-index access is shaped
  S& at(Index i) {
    SE_CHECK(i >= 0 && i < size(), "flat index ", i, " out of bounds for ", shape_str(shape_));
    return data_[static_cast<std::size_t>(i)];
  }
  S at(Index i) const {
    SE_CHECK(i >= 0 && i < size(), "flat index ", i, " out of bounds for ", shape_str(shape_));
    return data_[static_cast<std::size_t>(i)];
  }
  S& at(Index i, Index j) { return data_[static_cast<std::size_t>(offset({i, j}))]; }
  S at(Index i, Index j) const { return data_[static_cast<std::size_t>(offset({i, j}))]; }
  S& at(Index i, Index j, Index k) { return data_[static_cast<std::size_t>(offset({i, j, k}))]; }
  S at(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>(offset({i, j, k}))];
  }
  S& at(Index i, Index j, Index k, Index l) {
    return data_[static_cast<std::size_t>(offset({i, j, k, l}))];
  }
  S at(Index i, Index j, Index k, Index l) const {
    return data_[static_cast<std::size_t>(offset({i, j, k, l}))];
  }

  bool all_finite() const { return flat().allFinite(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Index offset(std::initializer_list<Index> idx) const {
    SE_CHECK(static_cast<int>(idx.size()) == rank(), "index rank ", idx.size(),
             " does not match tensor rank ", rank());
    Index off = 0;
    int d = 0;
    for (Index i : idx) {
      SE_CHECK(i >= 0 && i < shape_[static_cast<std::size_t>(d)], "index ", i,
               " out of bounds for dim ", d, " of ", shape_str(shape_));
      off = off * shape_[static_cast<std::size_t>(d)] + i;
      ++d;
    }
    return off;
  }

  Shape shape_;
  std::vector<S> data_;
};

template <typename S>
Tensor<S> uniform_tensor(Shape shape, Rng& rng, S lo, S hi) {
  Tensor<S> t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(dist(rng));
  return t;
}

template <typename S>
Tensor<S> gaussian_tensor(Shape shape, Rng& rng, S mean, S stddev) {
  Tensor<S> t(std::move(shape));
  std::normal_distribution<double> dist(static_cast<double>(mean), static_cast<double>(stddev));
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(dist(rng));
  return t;
}

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename S>
Tensor<S> fan_in_uniform(Shape shape, Index fan_in, Rng& rng) {
  SE_CHECK(fan_in >= 1, "fan_in must be >= 1");
  const S bound = S(1) / std::sqrt(static_cast<S>(fan_in));
  return uniform_tensor<S>(std::move(shape), rng, -bound, bound);
}

}  // namespace se
