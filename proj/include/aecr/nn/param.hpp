#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "aecr/core/tensor.hpp"

namespace aecr::nn {

/// Learnable tensor plus its accumulated gradient. `dims` is the logical
/// shape written to checkpoints (the 4-D storage shape pads with ones).
template <typename T>
struct Param {
  std::vector<int> dims;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(std::vector<int> d) : dims(std::move(d)) {
    Shape s;
    int* slots[4] = {&s.n, &s.c, &s.h, &s.w};
    for (std::size_t i = 0; i < dims.size() && i < 4; ++i) *slots[i] = dims[i];
    value = Tensor<T>(s);
    grad = Tensor<T>(s);
  }

  std::size_t numel() const { return value.size(); }
  void zero_grad() { grad.zero(); }
};

using Rng = std::mt19937_64;

/// Fan-in scaled uniform fill, bound sqrt(6 / fan_in).
template <typename T>
void fan_in_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
}

/// Calls f(name, param) for every parameter of `module` under `prefix`.
/// Modules implement `visit(prefix, f)` themselves; this just starts the walk.
template <typename Module, typename F>
void for_each_param(Module& module, F&& f) {
  module.visit(std::string{}, f);
}

inline std::string join_name(const std::string& prefix, const std::string& leaf) {
  return prefix.empty() ? leaf : prefix + "." + leaf;
}

}  // namespace aecr::nn
