#pragma once

#include <string>
#include <vector>

#include "aecr/deform/bilinear.hpp"
#include "aecr/nn/conv.hpp"
#include "aecr/nn/ops.hpp"

namespace aecr::deform {

/// Offsets-only deformable 3x3 convolution, stride 1, zero padding.
///
/// A regular 3x3 conv predicts 2*K*K offset channels from the input; channel
/// 2k holds dy and 2k+1 holds dx for tap k = ky*K + kx. Tap k at output pixel
/// (y, x) then reads the input bilinearly at (y + ky - 1 + dy, x + kx - 1 + dx).
template <typename T>
class DeformConv2d {
 public:
  static constexpr int kKernel = 3;
  static constexpr int kTaps = kKernel * kKernel;

  struct Cache {
    Tensor<T> x;
    Tensor<T> offsets;
    Buffer<T> columns;  // per sample (C*K*K) x (H*W), concatenated
  };

  DeformConv2d() = default;
  DeformConv2d(int in_ch, int out_ch)
      : in_(in_ch),
        out_(out_ch),
        weight({out_ch, in_ch, kKernel, kKernel}),
        bias({out_ch}),
        offset(in_ch, 2 * kTaps, 3) {}

  static std::size_t count(int in_ch, int out_ch) {
    return nn::Conv2d<T>::count(in_ch, out_ch, kKernel) +
           nn::Conv2d<T>::count(in_ch, 2 * kTaps, 3);
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  /// Kernel gets fan-in uniform init; the offset predictor starts at zero so
  /// the layer begins as a plain convolution. `offset_bias` seeds a constant
  /// offset (used by gradient checks to keep samples off lattice points).
  void init(nn::Rng& rng, T offset_bias = T(0)) {
    nn::fan_in_uniform(weight.value, in_ * kTaps, rng);
    bias.value.zero();
    offset.weight.value.zero();
    offset.bias.value.fill(offset_bias);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    check_input(x);
    Tensor<T> offsets = offset.forward(x);
    const int pix = x.h() * x.w();
    const int kk = in_ * kTaps;
    const std::size_t per_sample = static_cast<std::size_t>(kk) * pix;
    Buffer<T> cols(per_sample * x.n());
    for (int n = 0; n < x.n(); ++n) {
      sample_columns(x, offsets, n, cols.data() + per_sample * n);
    }
    Tensor<T> y(x.n(), out_, x.h(), x.w());
    nn::ConstMatMap<T> wmat(weight.value.data(), out_, kk);
    for (int n = 0; n < x.n(); ++n) {
      nn::MatMap<T> ymat(y.sample(n), out_, pix);
      ymat.noalias() = wmat * nn::ConstMatMap<T>(cols.data() + per_sample * n, kk, pix);
      for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias.value[o];
    }
    if (cache) {
      cache->x = x;
      cache->offsets = std::move(offsets);
      cache->columns = std::move(cols);
    }
    return y;
  }

  Tensor<T> backward(const Cache& c, const Tensor<T>& gy) {
    const Tensor<T>& x = c.x;
    const int height = x.h();
    const int width = x.w();
    const int pix = height * width;
    const int kk = in_ * kTaps;
    const std::size_t per_sample = static_cast<std::size_t>(kk) * pix;
    if (gy.n() != x.n() || gy.c() != out_ || gy.h() != height || gy.w() != width) {
      throw ConfigError("deformable conv backward: gradient shape " + gy.shape().str());
    }

    Tensor<T> gx(x.shape());
    Tensor<T> goff(c.offsets.shape());
    nn::ConstMatMap<T> wmat(weight.value.data(), out_, kk);
    nn::MatMap<T> gw(weight.grad.data(), out_, kk);
    Buffer<T> gcol(per_sample);

    for (int n = 0; n < x.n(); ++n) {
      nn::ConstMatMap<T> gymat(gy.sample(n), out_, pix);
      gw.noalias() += gymat * nn::ConstMatMap<T>(c.columns.data() + per_sample * n, kk, pix).transpose();
      for (int o = 0; o < out_; ++o) bias.grad[o] += gymat.row(o).sum();
      nn::MatMap<T>(gcol.data(), kk, pix).noalias() = wmat.transpose() * gymat;

      for (int k = 0; k < kTaps; ++k) {
        const int ky = k / kKernel;
        const int kx = k % kKernel;
        const T* dy_plane = c.offsets.plane(n, 2 * k);
        const T* dx_plane = c.offsets.plane(n, 2 * k + 1);
        T* gdy = goff.plane(n, 2 * k);
        T* gdx = goff.plane(n, 2 * k + 1);
        for (int p = 0; p < pix; ++p) {
          const int oy = p / width;
          const int ox = p % width;
          const auto st = make_stencil<T>(height, width, T(oy + ky - 1) + dy_plane[p],
                                          T(ox + kx - 1) + dx_plane[p]);
          T acc_y = 0;
          T acc_x = 0;
          for (int ch = 0; ch < in_; ++ch) {
            const T g = gcol[static_cast<std::size_t>(ch * kTaps + k) * pix + p];
            if (g == T(0)) continue;
            const T* plane = x.plane(n, ch);
            T* gplane = gx.plane(n, ch);
            for (int q = 0; q < 4; ++q) {
              if (st.valid[q]) gplane[st.index[q]] += g * st.weight(q);
            }
            T vy, vx;
            sample_coord_grad(plane, st, vy, vx);
            acc_y += g * vy;
            acc_x += g * vx;
          }
          gdy[p] += acc_y;
          gdx[p] += acc_x;
        }
      }
    }
    gx += offset.backward(x, goff);
    return gx;
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    f(nn::join_name(prefix, "weight"), weight);
    f(nn::join_name(prefix, "bias"), bias);
    offset.visit(nn::join_name(prefix, "offset"), f);
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.c() != in_) {
      throw ConfigError("deformable conv expects " + std::to_string(in_) +
                        " input channels, got " + std::to_string(x.c()));
    }
  }

  void sample_columns(const Tensor<T>& x, const Tensor<T>& offsets, int n, T* col) const {
    const int height = x.h();
    const int width = x.w();
    const int pix = height * width;
    for (int k = 0; k < kTaps; ++k) {
      const int ky = k / kKernel;
      const int kx = k % kKernel;
      const T* dy_plane = offsets.plane(n, 2 * k);
      const T* dx_plane = offsets.plane(n, 2 * k + 1);
      for (int p = 0; p < pix; ++p) {
        const int oy = p / width;
        const int ox = p % width;
        const auto st = make_stencil<T>(height, width, T(oy + ky - 1) + dy_plane[p],
                                        T(ox + kx - 1) + dx_plane[p]);
        for (int ch = 0; ch < in_; ++ch) {
          col[static_cast<std::size_t>(ch * kTaps + k) * pix + p] = sample(x.plane(n, ch), st);
        }
      }
    }
  }

  int in_ = 0;
  int out_ = 0;

 public:
  nn::Param<T> weight;
  nn::Param<T> bias;
  nn::Conv2d<T> offset;
};

/// Dynamic feature enhancement: deformable conv -> ReLU -> deformable conv.
template <typename T>
class Dfe {
 public:
  struct Cache {
    typename DeformConv2d<T>::Cache first, second;
    Tensor<T> hidden;
  };

  Dfe() = default;
  explicit Dfe(int width) : dcn1(width, width), dcn2(width, width) {}

  static std::size_t count(int width) { return 2 * DeformConv2d<T>::count(width, width); }

  void init(nn::Rng& rng, T offset_bias = T(0)) {
    dcn1.init(rng, offset_bias);
    dcn2.init(rng, offset_bias);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    if (!cache) return dcn2.forward(nn::relu(dcn1.forward(x)));
    cache->hidden = nn::relu(dcn1.forward(x, &cache->first));
    return dcn2.forward(cache->hidden, &cache->second);
  }

  Tensor<T> backward(const Cache& c, const Tensor<T>& gy) {
    Tensor<T> gh = dcn2.backward(c.second, gy);
    return dcn1.backward(c.first, nn::relu_backward(c.hidden, gh));
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    dcn1.visit(nn::join_name(prefix, "dcn1"), f);
    dcn2.visit(nn::join_name(prefix, "dcn2"), f);
  }

  DeformConv2d<T> dcn1;
  DeformConv2d<T> dcn2;
};

}  // namespace aecr::deform
