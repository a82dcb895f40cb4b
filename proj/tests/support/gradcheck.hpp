#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>
#include <random>
#include <vector>

#include "aecr/core/tensor.hpp"

namespace aecr::test {

/// Relative error ||a - n|| / max(||a||, ||n||) between analytic and numeric
/// gradients over the checked coordinates.
struct GradCheck {
  double rel_error = 0;
  std::size_t coords = 0;
};

template <typename T>
constexpr double gradcheck_tolerance() {
  return sizeof(T) == sizeof(float) ? 1e-3 : 1e-5;
}

inline constexpr double kFdStep = 1e-5;

/// Central differences of `loss` w.r.t. `values`, on at most `max_coords`
/// coordinates chosen with a fixed seed. `analytic` is indexed like `values`
/// and may come from a lower-precision twin of the perturbed function.
template <typename V, typename A, typename Loss>
GradCheck check_gradient(V* values, const A* analytic, std::size_t n, Loss&& loss,
                         std::size_t max_coords = 64, double h = kFdStep) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > max_coords) {
    std::mt19937_64 rng(n * 7919 + 13);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_coords);
  }
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i : idx) {
    const V saved = values[i];
    values[i] = static_cast<V>(saved + h);
    const double up = loss();
    values[i] = static_cast<V>(saved - h);
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double a = static_cast<double>(analytic[i]);
    diff += (a - numeric) * (a - numeric);
    na += a * a;
    nn += numeric * numeric;
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
  return {std::sqrt(diff) / denom, idx.size()};
}

template <typename V, typename A, typename Loss>
GradCheck check_gradient(Tensor<V>& values, const Tensor<A>& analytic, Loss&& loss,
                         std::size_t max_coords = 64, double h = kFdStep) {
  return check_gradient(values.data(), analytic.data(), values.size(), std::forward<Loss>(loss),
                        max_coords, h);
}

/// Copies every parameter of `src` into `dst` (same architecture, any
/// precision), in visit order.
template <typename Src, typename Dst>
void copy_params(Src& src, Dst& dst) {
  std::vector<std::vector<double>> values;
  auto read = [&](const std::string&, auto& p) {
    values.emplace_back(p.value.vec().begin(), p.value.vec().end());
  };
  src.visit(std::string{}, read);
  std::size_t k = 0;
  auto write = [&](const std::string&, auto& p) {
    const auto& v = values.at(k++);
    for (std::size_t i = 0; i < v.size(); ++i) p.value[i] = static_cast<std::decay_t<decltype(p.value[i])>>(v[i]);
  };
  dst.visit(std::string{}, write);
}

/// sum(w * y) accumulated in double; the usual scalar probe for layer checks.
template <typename T>
double weighted_sum(const Tensor<T>& y, const Tensor<T>& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * static_cast<double>(w[i]);
  return s;
}

template <typename T>
Tensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
  Tensor<T> t(s);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.vec()) v = static_cast<T>(d(rng));
  return t;
}

}  // namespace aecr::test
