#pragma once

#include <cmath>

#include "aecr/core/errors.hpp"

namespace aecr::deform {

/// The four lattice neighbours of a fractional coordinate and their weights.
/// Neighbours outside the plane are flagged invalid and read as zero.
template <typename T>
struct BilinearStencil {
  int y0 = 0, x0 = 0;
  T ly = 0, lx = 0;
  bool valid[4] = {false, false, false, false};  // (y0,x0) (y0,x1) (y1,x0) (y1,x1)
  int index[4] = {0, 0, 0, 0};

  T weight(int k) const {
    const T wy = (k < 2) ? T(1) - ly : ly;
    const T wx = (k % 2 == 0) ? T(1) - lx : lx;
    return wy * wx;
  }
};

template <typename T>
BilinearStencil<T> make_stencil(int height, int width, T y, T x) {
  if (!std::isfinite(y) || !std::isfinite(x)) {
    throw InputError("bilinear sample at non-finite coordinate");
  }
  BilinearStencil<T> s;
  const T fy = std::floor(y);
  const T fx = std::floor(x);
  s.ly = y - fy;
  s.lx = x - fx;
  // Far outside the plane every neighbour is phantom; avoid int overflow.
  if (fy < T(-2) || fy > T(height) || fx < T(-2) || fx > T(width)) return s;
  s.y0 = static_cast<int>(fy);
  s.x0 = static_cast<int>(fx);
  for (int k = 0; k < 4; ++k) {
    const int yy = s.y0 + (k / 2);
    const int xx = s.x0 + (k % 2);
    s.valid[k] = yy >= 0 && yy < height && xx >= 0 && xx < width;
    s.index[k] = s.valid[k] ? yy * width + xx : 0;
  }
  return s;
}

template <typename T>
T sample(const T* plane, const BilinearStencil<T>& s) {
  T v = 0;
  for (int k = 0; k < 4; ++k) {
    if (s.valid[k]) v += s.weight(k) * plane[s.index[k]];
  }
  return v;
}

/// Partial derivatives of the sampled value w.r.t. the y and x coordinates.
template <typename T>
void sample_coord_grad(const T* plane, const BilinearStencil<T>& s, T& dy, T& dx) {
  T v[4];
  for (int k = 0; k < 4; ++k) v[k] = s.valid[k] ? plane[s.index[k]] : T(0);
  dy = (T(1) - s.lx) * (v[2] - v[0]) + s.lx * (v[3] - v[1]);
  dx = (T(1) - s.ly) * (v[1] - v[0]) + s.ly * (v[3] - v[2]);
}

/// Bilinear interpolation of an H x W plane with zero phantom neighbours.
template <typename T>
T bilinear_sample(const T* plane, int height, int width, T y, T x) {
  return sample(plane, make_stencil(height, width, y, x));
}

}  // namespace aecr::deform
