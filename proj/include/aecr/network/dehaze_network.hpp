#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aecr/deform/deform_conv.hpp"
#include "aecr/network/config.hpp"
#include "aecr/network/fa_block.hpp"
#include "aecr/network/mixup.hpp"

namespace aecr::network {

/// One 2x upsampling stage followed by ReLU.
template <typename T>
class UpStage {
 public:
  struct Cache {
    Tensor<T> x, upsampled, y;
  };

  UpStage() = default;
  UpStage(int in_ch, int out_ch, UpsampleMode mode) : mode_(mode) {
    if (mode == UpsampleMode::TransposedConv) {
      tconv = nn::ConvTranspose2d<T>(in_ch, out_ch);
    } else {
      conv = nn::Conv2d<T>(in_ch, out_ch, 3);
    }
  }

  static std::size_t count(int in_ch, int out_ch, UpsampleMode mode) {
    return mode == UpsampleMode::TransposedConv ? nn::ConvTranspose2d<T>::count(in_ch, out_ch)
                                                : nn::Conv2d<T>::count(in_ch, out_ch, 3);
  }

  void init(nn::Rng& rng) {
    if (mode_ == UpsampleMode::TransposedConv) tconv.init(rng);
    else conv.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    Tensor<T> y;
    if (mode_ == UpsampleMode::TransposedConv) {
      y = nn::relu(tconv.forward(x));
    } else {
      Tensor<T> up = nn::upsample_nearest2x(x);
      y = nn::relu(conv.forward(up));
      if (cache) cache->upsampled = std::move(up);
    }
    if (cache) {
      cache->x = x;
      cache->y = y;
    }
    return y;
  }

  Tensor<T> backward(const Cache& c, const Tensor<T>& gy) {
    Tensor<T> g = nn::relu_backward(c.y, gy);
    if (mode_ == UpsampleMode::TransposedConv) return tconv.backward(c.x, g);
    return nn::upsample_nearest2x_backward(c.x.shape(), conv.backward(c.upsampled, g));
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    if (mode_ == UpsampleMode::TransposedConv) tconv.visit(prefix, f);
    else conv.visit(prefix, f);
  }

 private:
  UpsampleMode mode_ = UpsampleMode::TransposedConv;

 public:
  nn::ConvTranspose2d<T> tconv;
  nn::Conv2d<T> conv;
};

/// Encoder activations retained for the cross connections.
template <typename T>
struct DownFeatures {
  Tensor<T> f_low;    // input to the low-resolution trunk, (H/4, W/4)
  Tensor<T> f_down1;  // first stride-2 activation, (H/2, W/2)
  Tensor<T> f_down2;  // second stride-2 activation, (H/4, W/4)
};

/// Autoencoder-like dehazing network:
///   conv s1 -> conv s2 -> conv s2 -> FA blocks (+DFE) -> fuse(f_down2)
///   -> up x2 -> fuse(f_down1) -> up x2 -> conv to RGB.
/// Fusion is adaptive mixup, plain addition, or absent, per config.
template <typename T>
class DehazeNetwork {
 public:
  struct Cache {
    Tensor<T> input, h0;
    DownFeatures<T> down;
    typename deform::Dfe<T>::Cache dfe;
    Tensor<T> dfe_in;
    std::vector<typename FaBlock<T>::Cache> blocks;
    Tensor<T> trunk_out, fused1;
    typename UpStage<T>::Cache up1, up2;
    Tensor<T> fused2;
  };

  explicit DehazeNetwork(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int w0 = cfg.width_schedule[0];
    const int w1 = cfg.width_schedule[1];
    head = nn::Conv2d<T>(3, cfg.base_width, 3, 1);
    down1 = nn::Conv2d<T>(cfg.base_width, w0, 3, 2);
    down2 = nn::Conv2d<T>(w0, w1, 3, 2);
    for (int i = 0; i < cfg.num_fa_blocks; ++i) blocks.emplace_back(w1);
    if (cfg.use_dfe) dfe.emplace(w1);
    up1 = UpStage<T>(w1, w0, cfg.upsample_mode);
    up2 = UpStage<T>(w0, cfg.base_width, cfg.upsample_mode);
    tail = nn::Conv2d<T>(cfg.base_width, 3, 3, 1);
  }

  const NetworkConfig& config() const { return cfg_; }

  /// Seeded initialization; mixup thetas start at 0.
  void init(nn::Rng& rng, T dfe_offset_bias = T(0)) {
    head.init(rng);
    down1.init(rng);
    down2.init(rng);
    for (auto& b : blocks) b.init(rng);
    if (dfe) dfe->init(rng, dfe_offset_bias);
    up1.init(rng);
    up2.init(rng);
    tail.init(rng);
    mix1.theta.value.zero();
    mix2.theta.value.zero();
  }

  DownFeatures<T> downsample(const Tensor<T>& x, Tensor<T>* h0_out = nullptr) const {
    check_input(x);
    Tensor<T> h0 = nn::relu(head.forward(x));
    DownFeatures<T> f;
    f.f_down1 = nn::relu(down1.forward(h0));
    f.f_down2 = nn::relu(down2.forward(f.f_down1));
    f.f_low = f.f_down2;
    if (h0_out) *h0_out = std::move(h0);
    return f;
  }

  /// Raw (unclamped) restored image, same shape as the input.
  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const bool keep = cache != nullptr;
    if (keep) c.input = x;
    c.down = downsample(x, keep ? &c.h0 : nullptr);

    Tensor<T> t = c.down.f_low;
    if (dfe && cfg_.dfe_placement == DfePlacement::BeforeBlocks) {
      if (keep) c.dfe_in = t;
      t = dfe->forward(t, keep ? &c.dfe : nullptr);
    }
    if (keep) c.blocks.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      t = blocks[i].forward(t, keep ? &c.blocks[i] : nullptr);
    }
    if (dfe && cfg_.dfe_placement == DfePlacement::AfterBlocks) {
      if (keep) c.dfe_in = t;
      t = dfe->forward(t, keep ? &c.dfe : nullptr);
    }
    if (keep) c.trunk_out = t;

    Tensor<T> fused1 = fuse(mix1, c.down.f_down2, t);
    Tensor<T> u1 = up1.forward(fused1, keep ? &c.up1 : nullptr);
    Tensor<T> fused2 = fuse(mix2, c.down.f_down1, u1);
    Tensor<T> u2 = up2.forward(fused2, keep ? &c.up2 : nullptr);
    if (keep) {
      c.fused1 = std::move(fused1);
      c.fused2 = std::move(fused2);
    }
    return tail.forward(u2);
  }

  /// Forward pass clamped to [0, 1] for writing images.
  Tensor<T> infer(const Tensor<T>& x) const {
    Tensor<T> y = forward(x);
    for (auto& v : y.vec()) v = std::clamp(v, T(0), T(1));
    return y;
  }

  /// Accumulates parameter gradients; returns dL/d(input).
  Tensor<T> backward(const Cache& c, const Tensor<T>& gy) {
    Tensor<T> g = tail.backward(c.up2.y, gy);
    g = up2.backward(c.up2, g);
    auto [gd1_skip, gu1] = unfuse(mix2, c.down.f_down1, c.up1.y, g);
    g = up1.backward(c.up1, gu1);
    auto [gd2_skip, gt] = unfuse(mix1, c.down.f_down2, c.trunk_out, g);

    if (dfe && cfg_.dfe_placement == DfePlacement::AfterBlocks) gt = dfe->backward(c.dfe, gt);
    for (std::size_t i = blocks.size(); i-- > 0;) gt = blocks[i].backward(c.blocks[i], gt);
    if (dfe && cfg_.dfe_placement == DfePlacement::BeforeBlocks) gt = dfe->backward(c.dfe, gt);

    Tensor<T> gd2 = std::move(gt);
    if (!gd2_skip.empty()) gd2 += gd2_skip;
    Tensor<T> gd1 = down2.backward(c.down.f_down1, nn::relu_backward(c.down.f_down2, gd2));
    if (!gd1_skip.empty()) gd1 += gd1_skip;
    Tensor<T> gh0 = down1.backward(c.h0, nn::relu_backward(c.down.f_down1, gd1));
    return head.backward(c.input, nn::relu_backward(c.h0, gh0));
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    head.visit(nn::join_name(prefix, "head"), f);
    down1.visit(nn::join_name(prefix, "down1"), f);
    down2.visit(nn::join_name(prefix, "down2"), f);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].visit(nn::join_name(prefix, "blocks." + std::to_string(i)), f);
    }
    if (dfe) dfe->visit(nn::join_name(prefix, "dfe"), f);
    if (cfg_.use_mixup) {
      mix1.visit(nn::join_name(prefix, "mix1"), f);
      mix2.visit(nn::join_name(prefix, "mix2"), f);
    }
    up1.visit(nn::join_name(prefix, "up1"), f);
    up2.visit(nn::join_name(prefix, "up2"), f);
    tail.visit(nn::join_name(prefix, "tail"), f);
  }

  std::size_t param_count() {
    std::size_t total = 0;
    auto add = [&](const std::string&, nn::Param<T>& p) { total += p.numel(); };
    visit({}, add);
    return total;
  }

  void zero_grad() {
    auto z = [](const std::string&, nn::Param<T>& p) { p.zero_grad(); };
    visit({}, z);
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.c() != 3) throw InputError("network input must have 3 channels, got " + x.shape().str());
    if (x.h() % 4 != 0 || x.w() % 4 != 0) {
      throw InputError("network input H and W must be divisible by 4, got " + x.shape().str());
    }
  }

  Tensor<T> fuse(const AdaptiveMixup<T>& mix, const Tensor<T>& skip, const Tensor<T>& up) const {
    if (cfg_.use_mixup) return mix.forward(skip, up);
    if (cfg_.use_plain_skip) {
      Tensor<T> out = up;
      out += skip;
      return out;
    }
    return up;
  }

  /// Returns (grad for the skip input, or empty when unused; grad for the up input).
  std::pair<Tensor<T>, Tensor<T>> unfuse(AdaptiveMixup<T>& mix, const Tensor<T>& skip,
                                         const Tensor<T>& up, const Tensor<T>& g) {
    if (cfg_.use_mixup) return mix.backward(skip, up, g);
    if (cfg_.use_plain_skip) return {g, g};
    return {Tensor<T>{}, g};
  }

  NetworkConfig cfg_;

 public:
  nn::Conv2d<T> head, down1, down2;
  std::vector<FaBlock<T>> blocks;
  std::optional<deform::Dfe<T>> dfe;
  AdaptiveMixup<T> mix1, mix2;
  UpStage<T> up1, up2;
  nn::Conv2d<T> tail;
};

/// Per-module learnable-scalar counts, in network order.
inline std::vector<std::pair<std::string, std::size_t>> parameter_breakdown(const NetworkConfig& cfg) {
  cfg.validate(/*allow_empty_trunk=*/true);
  using C = nn::Conv2d<float>;
  const int w0 = cfg.width_schedule[0];
  const int w1 = cfg.width_schedule[1];
  std::vector<std::pair<std::string, std::size_t>> out;
  out.emplace_back("head", C::count(3, cfg.base_width, 3));
  out.emplace_back("down1", C::count(cfg.base_width, w0, 3));
  out.emplace_back("down2", C::count(w0, w1, 3));
  out.emplace_back("blocks", static_cast<std::size_t>(cfg.num_fa_blocks) * FaBlock<float>::count(w1));
  out.emplace_back("dfe", cfg.use_dfe ? deform::Dfe<float>::count(w1) : 0);
  out.emplace_back("mixup", cfg.use_mixup ? 2 : 0);
  out.emplace_back("up1", UpStage<float>::count(w1, w0, cfg.upsample_mode));
  out.emplace_back("up2", UpStage<float>::count(w0, cfg.base_width, cfg.upsample_mode));
  out.emplace_back("tail", C::count(cfg.base_width, 3, 3));
  return out;
}

/// Exact number of learnable scalars for `cfg`.
inline std::size_t count_parameters(const NetworkConfig& cfg) {
  std::size_t total = 0;
  for (const auto& [name, n] : parameter_breakdown(cfg)) total += n;
  return total;
}

}  // namespace aecr::network
