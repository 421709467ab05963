#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "pacnet/common.hpp"

namespace pacnet {

// Dense row-major tensor with a runtime shape. Rank is small (<= 5 in
// practice) and dimensions fit in 32 bits, but sizes are tracked in 64 bits
// because element counts of augmented video stacks overflow 32-bit math.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<std::int64_t> shape, T fill_value = T(0))
      : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(element_count(shape_)), fill_value);
  }

  TensorT(std::initializer_list<std::int64_t> shape, T fill_value = T(0))
      : TensorT(std::vector<std::int64_t>(shape), fill_value) {}

  static std::int64_t element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t i) const {
    return shape_[static_cast<std::size_t>(i)];
  }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  // Indexed accessors for the ranks this library actually uses.
  T& at(std::int64_t i0) { return data_[static_cast<std::size_t>(i0)]; }
  const T& at(std::int64_t i0) const {
    return data_[static_cast<std::size_t>(i0)];
  }

  T& at(std::int64_t i0, std::int64_t i1) {
    return data_[static_cast<std::size_t>(i0 * shape_[1] + i1)];
  }
  const T& at(std::int64_t i0, std::int64_t i1) const {
    return data_[static_cast<std::size_t>(i0 * shape_[1] + i1)];
  }

  T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2) {
    return data_[static_cast<std::size_t>((i0 * shape_[1] + i1) * shape_[2] +
                                          i2)];
  }
  const T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2) const {
    return data_[static_cast<std::size_t>((i0 * shape_[1] + i1) * shape_[2] +
                                          i2)];
  }

  T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3) {
    return data_[static_cast<std::size_t>(
        ((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3)];
  }
  const T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2,
              std::int64_t i3) const {
    return data_[static_cast<std::size_t>(
        ((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3)];
  }

  T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3,
        std::int64_t i4) {
    return data_[static_cast<std::size_t>(
        (((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3) *
            shape_[4] +
        i4)];
  }
  const T& at(std::int64_t i0, std::int64_t i1, std::int64_t i2,
              std::int64_t i3, std::int64_t i4) const {
    return data_[static_cast<std::size_t>(
        (((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3) *
            shape_[4] +
        i4)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& other) const {
    return shape_ == other.shape_;
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    s += ")";
    return s;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (std::int64_t i = 0; i < size(); ++i)
      out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

 private:
  void validate_shape() const {
    require(!shape_.empty(), "tensor shape must have at least one dimension");
    for (std::int64_t d : shape_)
      require(d >= 0, "tensor dimension must be non-negative, got ",
              std::to_string(d));
  }

  std::vector<std::int64_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace pacnet
