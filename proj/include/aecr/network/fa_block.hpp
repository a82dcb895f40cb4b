#pragma once

#include <algorithm>
#include <string>

#include "aecr/nn/conv.hpp"
#include "aecr/nn/ops.hpp"

namespace aecr::network {

/// Feature-attention residual block:
///   conv3x3 -> ReLU -> conv3x3 -> channel attention -> pixel attention -> + x
/// Channel attention: global pool -> 1x1 (w -> w/8) -> ReLU -> 1x1 (w/8 -> w) -> sigmoid.
/// Pixel attention:   1x1 (w -> w/8) -> ReLU -> 1x1 (w/8 -> 1) -> sigmoid.
template <typename T>
class FaBlock {
 public:
  struct Cache {
    Tensor<T> x, r1, a2, pooled, ch, cg, u, ph, pg;
  };

  FaBlock() = default;
  explicit FaBlock(int width)
      : width_(width),
        conv1(width, width, 3),
        conv2(width, width, 3),
        ca1(width, reduced(width), 1),
        ca2(reduced(width), width, 1),
        pa1(width, reduced(width), 1),
        pa2(reduced(width), 1, 1) {}

  /// Attention bottleneck width; never below one channel.
  static int reduced(int width) { return std::max(1, width / 8); }

  static std::size_t count(int width) {
    const int r = reduced(width);
    return 2 * nn::Conv2d<T>::count(width, width, 3) +
           nn::Conv2d<T>::count(width, r, 1) + nn::Conv2d<T>::count(r, width, 1) +
           nn::Conv2d<T>::count(width, r, 1) + nn::Conv2d<T>::count(r, 1, 1);
  }

  int width() const { return width_; }

  void init(nn::Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
    ca1.init(rng);
    ca2.init(rng);
    pa1.init(rng);
    pa2.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    if (x.c() != width_) {
      throw ConfigError("FA block of width " + std::to_string(width_) +
                        " got input " + x.shape().str());
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = x;
    c.r1 = nn::relu(conv1.forward(x));
    c.a2 = conv2.forward(c.r1);

    c.pooled = nn::global_avg_pool(c.a2);
    c.ch = nn::relu(ca1.forward(c.pooled));
    c.cg = nn::sigmoid(ca2.forward(c.ch));
    c.u = Tensor<T>(c.a2.shape());
    const std::size_t plane = x.shape().plane();
    for (int n = 0; n < x.n(); ++n) {
      for (int ch = 0; ch < width_; ++ch) {
        const T g = c.cg.at(n, ch, 0, 0);
        const T* src = c.a2.plane(n, ch);
        T* dst = c.u.plane(n, ch);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * g;
      }
    }

    c.ph = nn::relu(pa1.forward(c.u));
    c.pg = nn::sigmoid(pa2.forward(c.ph));
    Tensor<T> y(x.shape());
    for (int n = 0; n < x.n(); ++n) {
      const T* gate = c.pg.plane(n, 0);
      for (int ch = 0; ch < width_; ++ch) {
        const T* u = c.u.plane(n, ch);
        const T* in = x.plane(n, ch);
        T* out = y.plane(n, ch);
        for (std::size_t i = 0; i < plane; ++i) out[i] = u[i] * gate[i] + in[i];
      }
    }
    return y;
  }

  Tensor<T> backward(const Cache& c, const Tensor<T>& gy) {
    const Shape s = c.x.shape();
    const std::size_t plane = s.plane();
    Tensor<T> gx = gy;

    // pixel attention
    Tensor<T> gu(s);
    Tensor<T> gpg(s.n, 1, s.h, s.w);
    for (int n = 0; n < s.n; ++n) {
      const T* gate = c.pg.plane(n, 0);
      T* ggate = gpg.plane(n, 0);
      for (int ch = 0; ch < s.c; ++ch) {
        const T* g = gy.plane(n, ch);
        const T* u = c.u.plane(n, ch);
        T* gup = gu.plane(n, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          gup[i] = g[i] * gate[i];
          ggate[i] += g[i] * u[i];
        }
      }
    }
    Tensor<T> gph = pa2.backward(c.ph, nn::sigmoid_backward(c.pg, gpg));
    gu += pa1.backward(c.u, nn::relu_backward(c.ph, gph));

    // channel attention
    Tensor<T> ga2(s);
    Tensor<T> gcg(s.n, s.c, 1, 1);
    for (int n = 0; n < s.n; ++n) {
      for (int ch = 0; ch < s.c; ++ch) {
        const T gate = c.cg.at(n, ch, 0, 0);
        const T* g = gu.plane(n, ch);
        const T* a = c.a2.plane(n, ch);
        T* ga = ga2.plane(n, ch);
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          ga[i] = g[i] * gate;
          acc += g[i] * a[i];
        }
        gcg.at(n, ch, 0, 0) = acc;
      }
    }
    Tensor<T> gch = ca2.backward(c.ch, nn::sigmoid_backward(c.cg, gcg));
    Tensor<T> gpooled = ca1.backward(c.pooled, nn::relu_backward(c.ch, gch));
    ga2 += nn::global_avg_pool_backward(s, gpooled);

    Tensor<T> gr1 = conv2.backward(c.r1, ga2);
    gx += conv1.backward(c.x, nn::relu_backward(c.r1, gr1));
    return gx;
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    conv1.visit(nn::join_name(prefix, "conv1"), f);
    conv2.visit(nn::join_name(prefix, "conv2"), f);
    ca1.visit(nn::join_name(prefix, "ca1"), f);
    ca2.visit(nn::join_name(prefix, "ca2"), f);
    pa1.visit(nn::join_name(prefix, "pa1"), f);
    pa2.visit(nn::join_name(prefix, "pa2"), f);
  }

 private:
  int width_ = 0;

 public:
  nn::Conv2d<T> conv1, conv2;
  nn::Conv2d<T> ca1, ca2;
  nn::Conv2d<T> pa1, pa2;
};

}  // namespace aecr::network
