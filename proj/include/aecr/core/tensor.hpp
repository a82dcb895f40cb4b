#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aecr/core/buffer.hpp"
#include "aecr/core/errors.hpp"

namespace aecr {

/// Batch x channel x height x width extents.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

/// Dense NCHW array. Images carry C = 3 with values in [0, 1].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape_(s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ConfigError("tensor dims must be >= 1, got " + s.str());
    }
    data_.assign(s.numel(), fill);
  }
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  Buffer<T>& vec() { return data_; }
  const Buffer<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }
  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const {
    return data_[index(n, c, y, x)];
  }

  /// Pointer to the (n, c) plane.
  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }
  /// Pointer to sample n (C*H*W contiguous values).
  T* sample(int n) { return data_.data() + index(n, 0, 0, 0); }
  const T* sample(int n) const { return data_.data() + index(n, 0, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  /// Copy of samples [first, first + count).
  Tensor slice_batch(int first, int count) const {
    Shape s = shape_;
    s.n = count;
    Tensor out(s);
    std::copy_n(sample(first), s.numel(), out.data());
    return out;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(*this, o, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static void require_same_shape(const Tensor& a, const Tensor& b,
                                 const char* what) {
    if (a.shape() != b.shape()) {
      throw ConfigError(std::string(what) + ": shape mismatch " +
                        a.shape().str() + " vs " + b.shape().str());
    }
  }

 private:
  Shape shape_{0, 0, 0, 0};
  Buffer<T> data_;
};

/// Concatenate along the batch axis; all inputs share C, H, W.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ConfigError("stack_batch: no tensors");
  Shape s = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.c() != s.c || p.h() != s.h || p.w() != s.w) {
      throw ConfigError("stack_batch: shape mismatch " + p.shape().str() +
                        " vs " + s.str());
    }
    total += p.n();
  }
  s.n = total;
  Tensor<T> out(s);
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.vec().begin(), p.vec().end(), dst);
  return out;
}

}  // namespace aecr
