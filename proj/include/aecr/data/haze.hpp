#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aecr/core/tensor.hpp"

namespace aecr::data {

/// Atmospheric light and transmission. The transmission is either a scalar
/// or a (1, 1, H, W) field.
struct HazeParams {
  double atmospheric_light = 1.0;
  double transmission = 1.0;
  Tensor<double> transmission_field;  // empty => scalar transmission

  bool has_field() const { return !transmission_field.empty(); }
  double t_at(int y, int x) const {
    return has_field() ? transmission_field.at(0, 0, y, x) : transmission;
  }

  void validate() const {
    if (!(atmospheric_light >= 0.7 && atmospheric_light <= 1.0)) {
      throw InputError("atmospheric light must lie in [0.7, 1.0]");
    }
    auto check = [](double t) {
      if (!(t > 0.0)) throw InputError("transmission must be > 0 everywhere");
      if (t > 1.0) throw InputError("transmission must be <= 1");
    };
    if (has_field()) {
      for (double t : transmission_field.vec()) check(t);
    } else {
      check(transmission);
    }
  }
};

/// Scattering model I = J * t + A * (1 - t), clipped to [0, 1].
template <typename T>
Tensor<T> synthesize_haze(const Tensor<T>& clear, const HazeParams& hp) {
  hp.validate();
  if (hp.has_field() &&
      (hp.transmission_field.h() != clear.h() || hp.transmission_field.w() != clear.w())) {
    throw InputError("transmission field " + hp.transmission_field.shape().str() +
                     " does not match image " + clear.shape().str());
  }
  Tensor<T> out(clear.shape());
  const double a = hp.atmospheric_light;
  for (int n = 0; n < clear.n(); ++n) {
    for (int c = 0; c < clear.c(); ++c) {
      for (int y = 0; y < clear.h(); ++y) {
        for (int x = 0; x < clear.w(); ++x) {
          const double t = hp.t_at(y, x);
          const double v = static_cast<double>(clear.at(n, c, y, x)) * t + a * (1.0 - t);
          out.at(n, c, y, x) = static_cast<T>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return out;
}

/// Inverse of the scattering model: J = (I - A (1 - t)) / t.
template <typename T>
Tensor<T> remove_haze(const Tensor<T>& hazy, const HazeParams& hp) {
  Tensor<T> out(hazy.shape());
  const double a = hp.atmospheric_light;
  for (int n = 0; n < hazy.n(); ++n)
    for (int c = 0; c < hazy.c(); ++c)
      for (int y = 0; y < hazy.h(); ++y)
        for (int x = 0; x < hazy.w(); ++x) {
          const double t = hp.t_at(y, x);
          out.at(n, c, y, x) =
              static_cast<T>((static_cast<double>(hazy.at(n, c, y, x)) - a * (1.0 - t)) / t);
        }
  return out;
}

/// Smooth transmission field: bilinear (corner-aligned) upsampling of a
/// grid x grid lattice of values.
inline Tensor<double> transmission_from_grid(const std::vector<std::vector<double>>& grid, int height,
                                             int width) {
  const int g = static_cast<int>(grid.size());
  if (g < 2) throw InputError("transmission grid needs at least 2x2 nodes");
  Tensor<double> field(1, 1, height, width);
  for (int y = 0; y < height; ++y) {
    const double gy = height > 1 ? static_cast<double>(y) * (g - 1) / (height - 1) : 0.0;
    const int y0 = std::min(static_cast<int>(gy), g - 2);
    const double ly = gy - y0;
    for (int x = 0; x < width; ++x) {
      const double gx = width > 1 ? static_cast<double>(x) * (g - 1) / (width - 1) : 0.0;
      const int x0 = std::min(static_cast<int>(gx), g - 2);
      const double lx = gx - x0;
      field.at(0, 0, y, x) = (1 - ly) * ((1 - lx) * grid[y0][x0] + lx * grid[y0][x0 + 1]) +
                             ly * ((1 - lx) * grid[y0 + 1][x0] + lx * grid[y0 + 1][x0 + 1]);
    }
  }
  return field;
}

/// Seeded lattice of transmission values drawn uniformly from [lo, hi].
template <typename Rng>
std::vector<std::vector<double>> random_transmission_grid(int nodes, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<std::vector<double>> grid(nodes, std::vector<double>(nodes));
  for (auto& row : grid)
    for (auto& v : row) v = dist(rng);
  return grid;
}

}  // namespace aecr::data
