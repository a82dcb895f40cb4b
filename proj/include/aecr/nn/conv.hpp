#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <string>
#include <vector>

#include "aecr/core/tensor.hpp"
#include "aecr/nn/param.hpp"

namespace aecr::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_extent(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// Unfolds one C x H x W sample into a (C*K*K) x (Ho*Wo) column matrix.
template <typename T>
void im2col(const T* x, int channels, int height, int width,
            const ConvGeometry& g, T* col) {
  const int ho = g.out_extent(height);
  const int wo = g.out_extent(width);
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c) {
    const T* plane = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters (accumulates) columns back into the image.
template <typename T>
void col2im(const T* col, int channels, int height, int width,
            const ConvGeometry& g, T* x) {
  const int ho = g.out_extent(height);
  const int wo = g.out_extent(width);
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c) {
    T* plane = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row =
            col + (static_cast<std::size_t>(c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

/// 2-D convolution with bias, "same"-style zero padding.
/// Weight layout (out, in, K, K).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel = 3, int stride = 1)
      : in_(in_ch),
        out_(out_ch),
        geom_{kernel, stride, kernel / 2},
        weight({out_ch, in_ch, kernel, kernel}),
        bias({out_ch}) {}

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  const ConvGeometry& geometry() const { return geom_; }
  std::size_t param_count() const { return weight.numel() + bias.numel(); }

  static std::size_t count(int in_ch, int out_ch, int kernel) {
    return static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel + out_ch;
  }

  void init(Rng& rng) {
    fan_in_uniform(weight.value, in_ * geom_.kernel * geom_.kernel, rng);
    bias.value.zero();
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    check_input(x);
    const int ho = geom_.out_extent(x.h());
    const int wo = geom_.out_extent(x.w());
    Tensor<T> y(x.n(), out_, ho, wo);
    const int kk = in_ * geom_.kernel * geom_.kernel;
    const int pix = ho * wo;
    ConstMatMap<T> wmat(weight.value.data(), out_, kk);
    Buffer<T> col;
    for (int n = 0; n < x.n(); ++n) {
      MatMap<T> ymat(y.sample(n), out_, pix);
      if (is_pointwise()) {
        ymat.noalias() = wmat * ConstMatMap<T>(x.sample(n), in_, pix);
      } else {
        col.resize(static_cast<std::size_t>(kk) * pix);
        im2col(x.sample(n), in_, x.h(), x.w(), geom_, col.data());
        ymat.noalias() = wmat * ConstMatMap<T>(col.data(), kk, pix);
      }
      for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias.value[o];
    }
    return y;
  }

  /// Accumulates weight/bias gradients and returns dL/dx.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
    return backward_impl(x, gy, weight.grad.data(), bias.grad.data());
  }

  /// dL/dx only; parameters are treated as frozen.
  Tensor<T> backward_input(const Tensor<T>& x, const Tensor<T>& gy) const {
    return backward_impl(x, gy, nullptr, nullptr);
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    f(join_name(prefix, "weight"), weight);
    f(join_name(prefix, "bias"), bias);
  }

 private:
  Tensor<T> backward_impl(const Tensor<T>& x, const Tensor<T>& gy, T* gw_data,
                          T* gb_data) const {
    check_input(x);
    const int ho = geom_.out_extent(x.h());
    const int wo = geom_.out_extent(x.w());
    if (gy.n() != x.n() || gy.c() != out_ || gy.h() != ho || gy.w() != wo) {
      throw ConfigError("conv backward: gradient shape " + gy.shape().str());
    }
    const bool params = gw_data != nullptr;
    Tensor<T> gx(x.shape());
    const int kk = in_ * geom_.kernel * geom_.kernel;
    const int pix = ho * wo;
    ConstMatMap<T> wmat(weight.value.data(), out_, kk);
    MatMap<T> gw(gw_data, out_, kk);
    Buffer<T> col;
    Buffer<T> gcol;
    for (int n = 0; n < x.n(); ++n) {
      ConstMatMap<T> gymat(gy.sample(n), out_, pix);
      if (is_pointwise()) {
        ConstMatMap<T> xmat(x.sample(n), in_, pix);
        if (params) gw.noalias() += gymat * xmat.transpose();
        MatMap<T>(gx.sample(n), in_, pix).noalias() = wmat.transpose() * gymat;
      } else {
        col.resize(static_cast<std::size_t>(kk) * pix);
        gcol.resize(col.size());
        if (params) {
          im2col(x.sample(n), in_, x.h(), x.w(), geom_, col.data());
          gw.noalias() += gymat * ConstMatMap<T>(col.data(), kk, pix).transpose();
        }
        MatMap<T>(gcol.data(), kk, pix).noalias() = wmat.transpose() * gymat;
        col2im(gcol.data(), in_, x.h(), x.w(), geom_, gx.sample(n));
      }
      if (params) {
        for (int o = 0; o < out_; ++o) gb_data[o] += gymat.row(o).sum();
      }
    }
    return gx;
  }
  bool is_pointwise() const {
    return geom_.kernel == 1 && geom_.stride == 1 && geom_.pad == 0;
  }
  void check_input(const Tensor<T>& x) const {
    if (x.c() != in_) {
      throw ConfigError("conv expects " + std::to_string(in_) +
                        " input channels, got " + std::to_string(x.c()));
    }
  }

  int in_ = 0;
  int out_ = 0;
  ConvGeometry geom_;

 public:
  Param<T> weight;
  Param<T> bias;
};

/// Stride-2 transposed convolution (K=3, pad 1, output padding 1): doubles
/// H and W. Weight layout (in, out, K, K).
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch)
      : in_(in_ch),
        out_(out_ch),
        weight({in_ch, out_ch, kKernel, kKernel}),
        bias({out_ch}) {}

  static constexpr int kKernel = 3;

  static std::size_t count(int in_ch, int out_ch) {
    return static_cast<std::size_t>(in_ch) * out_ch * kKernel * kKernel + out_ch;
  }

  void init(Rng& rng) {
    // Each output pixel of a stride-2 transposed conv sees in * K*K / 4 taps on average.
    fan_in_uniform(weight.value, std::max(1, in_ * kKernel * kKernel / 4), rng);
    bias.value.zero();
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    check_input(x);
    const int ho = 2 * x.h();
    const int wo = 2 * x.w();
    Tensor<T> y(x.n(), out_, ho, wo);
    const int kk = out_ * kKernel * kKernel;
    const int pix = x.h() * x.w();
    ConstMatMap<T> wmat(weight.value.data(), in_, kk);
    Buffer<T> col(static_cast<std::size_t>(kk) * pix);
    for (int n = 0; n < x.n(); ++n) {
      MatMap<T>(col.data(), kk, pix).noalias() =
          wmat.transpose() * ConstMatMap<T>(x.sample(n), in_, pix);
      col2im(col.data(), out_, ho, wo, geom(), y.sample(n));
      for (int o = 0; o < out_; ++o) {
        T* p = y.plane(n, o);
        for (std::size_t i = 0; i < y.shape().plane(); ++i) p[i] += bias.value[o];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
    check_input(x);
    if (gy.n() != x.n() || gy.c() != out_ || gy.h() != 2 * x.h() ||
        gy.w() != 2 * x.w()) {
      throw ConfigError("transposed conv backward: gradient shape " +
                        gy.shape().str());
    }
    Tensor<T> gx(x.shape());
    const int kk = out_ * kKernel * kKernel;
    const int pix = x.h() * x.w();
    ConstMatMap<T> wmat(weight.value.data(), in_, kk);
    MatMap<T> gw(weight.grad.data(), in_, kk);
    Buffer<T> gcol(static_cast<std::size_t>(kk) * pix);
    for (int n = 0; n < x.n(); ++n) {
      im2col(gy.sample(n), out_, gy.h(), gy.w(), geom(), gcol.data());
      ConstMatMap<T> gmat(gcol.data(), kk, pix);
      MatMap<T>(gx.sample(n), in_, pix).noalias() = wmat * gmat;
      {
        gw.noalias() += ConstMatMap<T>(x.sample(n), in_, pix) * gmat.transpose();
        for (int o = 0; o < out_; ++o) {
          const T* p = gy.plane(n, o);
          T s = 0;
          for (std::size_t i = 0; i < gy.shape().plane(); ++i) s += p[i];
          bias.grad[o] += s;
        }
      }
    }
    return gx;
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    f(join_name(prefix, "weight"), weight);
    f(join_name(prefix, "bias"), bias);
  }

 private:
  static ConvGeometry geom() { return {kKernel, 2, 1}; }
  void check_input(const Tensor<T>& x) const {
    if (x.c() != in_) {
      throw ConfigError("transposed conv expects " + std::to_string(in_) +
                        " input channels, got " + std::to_string(x.c()));
    }
  }

  int in_ = 0;
  int out_ = 0;

 public:
  Param<T> weight;
  Param<T> bias;
};

}  // namespace aecr::nn
