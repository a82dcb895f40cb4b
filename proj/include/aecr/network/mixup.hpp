#pragma once

#include <string>

#include "aecr/nn/ops.hpp"
#include "aecr/nn/param.hpp"

namespace aecr::network {

/// sigma(theta) * f_down + (1 - sigma(theta)) * f_up, elementwise.
template <typename T>
Tensor<T> adaptive_mixup(const Tensor<T>& f_down, const Tensor<T>& f_up, T theta) {
  Tensor<T>::require_same_shape(f_down, f_up, "adaptive mixup");
  const T s = nn::sigmoid(theta);
  Tensor<T> out(f_down.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = s * f_down[i] + (T(1) - s) * f_up[i];
  }
  return out;
}

template <typename T>
struct MixupGrads {
  Tensor<T> f_down;
  Tensor<T> f_up;
  T theta = 0;
};

/// d/dtheta = sigma(theta) (1 - sigma(theta)) * sum(g * (f_down - f_up)).
template <typename T>
MixupGrads<T> adaptive_mixup_backward(const Tensor<T>& f_down, const Tensor<T>& f_up,
                                      T theta, const Tensor<T>& g) {
  const T s = nn::sigmoid(theta);
  MixupGrads<T> out{Tensor<T>(g.shape()), Tensor<T>(g.shape()), T(0)};
  T acc = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.f_down[i] = s * g[i];
    out.f_up[i] = (T(1) - s) * g[i];
    acc += g[i] * (f_down[i] - f_up[i]);
  }
  out.theta = s * (T(1) - s) * acc;
  return out;
}

/// Learnable fusion factor; theta starts at 0 (sigma = 0.5).
template <typename T>
class AdaptiveMixup {
 public:
  AdaptiveMixup() : theta({1}) {}

  T value() const { return theta.value[0]; }

  Tensor<T> forward(const Tensor<T>& f_down, const Tensor<T>& f_up) const {
    return adaptive_mixup(f_down, f_up, value());
  }

  /// Returns (grad f_down, grad f_up); accumulates d/dtheta.
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& f_down,
                                           const Tensor<T>& f_up,
                                           const Tensor<T>& g) {
    auto r = adaptive_mixup_backward(f_down, f_up, value(), g);
    theta.grad[0] += r.theta;
    return {std::move(r.f_down), std::move(r.f_up)};
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    f(nn::join_name(prefix, "theta"), theta);
  }

  nn::Param<T> theta;
};

}  // namespace aecr::network
