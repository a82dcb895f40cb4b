#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aecr/core/tensor.hpp"

namespace aecr::nn {

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

/// Gradient through ReLU given its output (or input; the mask is the same).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& gy) {
  Tensor<T> gx(gy.shape());
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = y[i] > T(0) ? gy[i] : T(0);
  return gx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy) {
  Tensor<T> gx(gy.shape());
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * y[i] * (T(1) - y[i]);
  return gx;
}

/// Mean over H x W, giving (N, C, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), 1, 1);
  const std::size_t plane = x.shape().plane();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      y.at(n, c, 0, 0) = s / static_cast<T>(plane);
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& in, const Tensor<T>& gy) {
  Tensor<T> gx(in);
  const std::size_t plane = in.plane();
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      const T g = gy.at(n, c, 0, 0) / static_cast<T>(plane);
      T* p = gx.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return gx;
}

/// 2x nearest-neighbour upsampling.
template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int yy = 0; yy < y.h(); ++yy)
        for (int xx = 0; xx < y.w(); ++xx)
          y.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
  return y;
}

template <typename T>
Tensor<T> upsample_nearest2x_backward(const Shape& in, const Tensor<T>& gy) {
  Tensor<T> gx(in);
  for (int n = 0; n < gy.n(); ++n)
    for (int c = 0; c < gy.c(); ++c)
      for (int yy = 0; yy < gy.h(); ++yy)
        for (int xx = 0; xx < gy.w(); ++xx)
          gx.at(n, c, yy / 2, xx / 2) += gy.at(n, c, yy, xx);
  return gx;
}

/// 2x2 stride-2 max pooling; `argmax` receives the flat input index of
/// each selected element for the backward pass.
template <typename T>
Tensor<T> max_pool2x2(const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
  Tensor<T> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  if (argmax) argmax->resize(y.size());
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int yy = 0; yy < y.h(); ++yy) {
        for (int xx = 0; xx < y.w(); ++xx, ++o) {
          std::size_t best = x.index(n, c, 2 * yy, 2 * xx);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = x.index(n, c, 2 * yy + dy, 2 * xx + dx);
              if (x[i] > x[best]) best = i;
            }
          }
          y[o] = x[best];
          if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> max_pool2x2_backward(const Shape& in, const Tensor<T>& gy,
                               const std::vector<std::uint32_t>& argmax) {
  Tensor<T> gx(in);
  for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
  return gx;
}

}  // namespace aecr::nn
