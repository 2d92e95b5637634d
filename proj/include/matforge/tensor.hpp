#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "matforge/util.hpp"

namespace matforge {

// Dense n-d array, row-major. Activations use (N, C, H, W).
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    for (auto d : shape_) {
      if (d <= 0) throw ConfigError("Tensor: nonpositive dimension");
    }
    data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
  }

  Tensor(std::vector<std::int64_t> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel_of(shape_) != static_cast<std::int64_t>(data_.size()))
      throw ConfigError("Tensor: shape does not match element count");
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // 4-d accessors for NCHW activations.
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  T& at(std::int64_t n, std::int64_t c) { return data_[static_cast<std::size_t>(n * shape_[1] + c)]; }
  const T& at(std::int64_t n, std::int64_t c) const { return data_[static_cast<std::size_t>(n * shape_[1] + c)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor<T> reshaped(std::vector<std::int64_t> shape) const {
    if (numel_of(shape) != numel()) throw ConfigError("reshape: element count mismatch");
    return Tensor<T>(std::move(shape), data_);
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_shape(const Tensor<T>& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  static Tensor<T> randn(std::vector<std::int64_t> shape, T stddev, std::mt19937_64& rng) {
    Tensor<T> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
    return t;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace matforge
