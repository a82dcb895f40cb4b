#pragma once

#include "aecr/core/tensor.hpp"

namespace aecr::data {

/// Mirror index without repeating the edge sample (d c b | a b c d | c b a).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Reflect-pads the bottom and right edges up to the next multiple of `m`.
template <typename T>
Tensor<T> reflect_pad_to_multiple(const Tensor<T>& x, int m) {
  const int h = (x.h() + m - 1) / m * m;
  const int w = (x.w() + m - 1) / m * m;
  Tensor<T> out(x.n(), x.c(), h, w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out.at(n, c, y, xx) = x.at(n, c, reflect_index(y, x.h()), reflect_index(xx, x.w()));
  return out;
}

/// Top-left `h` x `w` window.
template <typename T>
Tensor<T> crop_top_left(const Tensor<T>& x, int h, int w) {
  if (h > x.h() || w > x.w()) throw InputError("crop window exceeds " + x.shape().str());
  Tensor<T> out(x.n(), x.c(), h, w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) out.at(n, c, y, xx) = x.at(n, c, y, xx);
  return out;
}

}  // namespace aecr::data
