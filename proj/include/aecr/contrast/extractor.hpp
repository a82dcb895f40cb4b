#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "aecr/nn/conv.hpp"
#include "aecr/nn/ops.hpp"
#include "aecr/train/checkpoint.hpp"

namespace aecr::contrast {

/// Frozen conv/ReLU/max-pool stack that emits activations at selected
/// convolution positions.
///
/// Tap index k (1-based) names the activation after the ReLU of the k-th
/// convolution. The stack is evaluated only up to the deepest tap.
/// Gradients flow through to the input image; parameters never change.
template <typename T>
class FeatureExtractor {
 public:
  struct Layer {
    nn::Conv2d<T> conv;
    bool pool_after = false;
  };

  struct Cache {
    std::vector<Tensor<T>> inputs;   // conv inputs, one per evaluated layer
    std::vector<Tensor<T>> relu_out; // post-ReLU activations
    std::vector<std::vector<std::uint32_t>> argmax;
  };

  FeatureExtractor() = default;
  FeatureExtractor(std::vector<Layer> layers, std::vector<int> taps,
                   std::array<T, 3> mean, std::array<T, 3> stddev)
      : layers_(std::move(layers)), taps_(std::move(taps)), mean_(mean), std_(stddev) {
    if (taps_.empty()) throw ConfigError("extractor needs at least one tap", "loss.taps");
    std::set<int> seen;
    for (int t : taps_) {
      if (t < 0 || t > static_cast<int>(layers_.size()) || !seen.insert(t).second) {
        throw ConfigError("invalid extractor tap index " + std::to_string(t), "loss.taps");
      }
    }
    if (!std::is_sorted(taps_.begin(), taps_.end())) {
      throw ConfigError("extractor taps must be increasing", "loss.taps");
    }
    for (auto s : std_) {
      if (!(s > T(0))) throw ConfigError("extractor normalization std must be positive");
    }
  }

  /// Test extractor whose single tap is the raw input (tap index 0, no
  /// normalization).
  static FeatureExtractor identity() {
    return FeatureExtractor({}, {0}, {T(0), T(0), T(0)}, {T(1), T(1), T(1)});
  }

  const std::vector<int>& taps() const { return taps_; }
  std::size_t num_taps() const { return taps_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::array<T, 3> norm_mean() const { return mean_; }
  std::array<T, 3> norm_std() const { return std_; }

  /// Smallest H (and W) the stack accepts: one pixel must survive every
  /// pooling before the deepest tap.
  int min_extent() const {
    int pools = 0;
    for (int i = 0; i + 1 < taps_.back(); ++i) pools += layers_[i].pool_after ? 1 : 0;
    return 1 << pools;
  }

  std::vector<Tensor<T>> extract(const Tensor<T>& image, Cache* cache = nullptr) const {
    if (image.c() != 3) throw InputError("extractor input must have 3 channels");
    if (image.h() < min_extent() || image.w() < min_extent()) {
      throw InputError("image " + image.shape().str() + " smaller than extractor footprint " +
                       std::to_string(min_extent()));
    }
    std::vector<Tensor<T>> out;
    out.reserve(taps_.size());
    Tensor<T> x = normalize(image);
    if (cache) *cache = Cache{};
    std::size_t next_tap = 0;
    if (taps_[0] == 0) {
      out.push_back(x);
      ++next_tap;
    }
    const int depth = taps_.back();
    for (int i = 0; i < depth; ++i) {
      const Layer& layer = layers_[i];
      Tensor<T> a = nn::relu(layer.conv.forward(x));
      if (cache) {
        cache->inputs.push_back(std::move(x));
        cache->relu_out.push_back(a);
      }
      if (next_tap < taps_.size() && taps_[next_tap] == i + 1) {
        out.push_back(a);
        ++next_tap;
      }
      if (layer.pool_after && i + 1 < depth) {
        std::vector<std::uint32_t> idx;
        x = nn::max_pool2x2(a, cache ? &idx : nullptr);
        if (cache) cache->argmax.push_back(std::move(idx));
      } else {
        x = std::move(a);
        if (cache) cache->argmax.emplace_back();
      }
    }
    return out;
  }

  /// dL/d(image) given dL/d(tap) for every tap (same order as `extract`).
  Tensor<T> backward(const Shape& image_shape, const Cache& c,
                     const std::vector<Tensor<T>>& tap_grads) const {
    if (tap_grads.size() != taps_.size()) throw ConfigError("extractor backward: tap count mismatch");
    const int depth = taps_.back();
    std::ptrdiff_t tap = static_cast<std::ptrdiff_t>(taps_.size()) - 1;
    Tensor<T> g;  // gradient w.r.t. the input of the layer below the cursor
    for (int i = depth - 1; i >= 0; --i) {
      const Layer& layer = layers_[i];
      Tensor<T> ga;  // gradient w.r.t. relu_out[i]
      if (!g.empty()) {
        ga = layer.pool_after && i + 1 < depth
                 ? nn::max_pool2x2_backward(c.relu_out[i].shape(), g, c.argmax[i])
                 : std::move(g);
      }
      if (tap >= 0 && taps_[tap] == i + 1) {
        if (ga.empty()) ga = tap_grads[tap];
        else ga += tap_grads[tap];
        --tap;
      }
      g = layer.conv.backward_input(c.inputs[i], nn::relu_backward(c.relu_out[i], ga));
    }
    if (tap == 0 && taps_[0] == 0) {
      if (g.empty()) g = tap_grads[0];
      else g += tap_grads[0];
    }
    // Undo the normalization scale.
    Tensor<T> out(image_shape);
    for (int n = 0; n < image_shape.n; ++n) {
      for (int ch = 0; ch < 3; ++ch) {
        const T* src = g.plane(n, ch);
        T* dst = out.plane(n, ch);
        for (std::size_t i = 0; i < image_shape.plane(); ++i) dst[i] = src[i] / std_[ch];
      }
    }
    return out;
  }

  template <typename F>
  void visit(const std::string& prefix, F& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].conv.visit(nn::join_name(prefix, "conv" + std::to_string(i + 1)), f);
    }
  }

 private:
  Tensor<T> normalize(const Tensor<T>& image) const {
    Tensor<T> x(image.shape());
    for (int n = 0; n < image.n(); ++n) {
      for (int ch = 0; ch < 3; ++ch) {
        const T* src = image.plane(n, ch);
        T* dst = x.plane(n, ch);
        for (std::size_t i = 0; i < image.shape().plane(); ++i) dst[i] = (src[i] - mean_[ch]) / std_[ch];
      }
    }
    return x;
  }

  std::vector<Layer> layers_;
  std::vector<int> taps_;
  std::array<T, 3> mean_{};
  std::array<T, 3> std_{};
};

/// Classification-standard input normalization.
inline constexpr std::array<double, 3> kImageNetMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageNetStd{0.229, 0.224, 0.225};

/// Default tap positions: convolutions 1, 3, 5, 9 and 13.
inline const std::vector<int>& default_taps() {
  static const std::vector<int> taps{1, 3, 5, 9, 13};
  return taps;
}

namespace detail {

/// 19-layer classification topology: convs per stage and stage widths.
inline constexpr std::array<int, 5> kVggStageConvs{2, 2, 4, 4, 4};
inline constexpr std::array<int, 5> kVggStageWidths{64, 128, 256, 512, 512};

template <typename T>
std::vector<typename FeatureExtractor<T>::Layer> staged_layers(const std::array<int, 5>& widths,
                                                               int max_layers) {
  std::vector<typename FeatureExtractor<T>::Layer> layers;
  int in = 3;
  for (std::size_t s = 0; s < kVggStageConvs.size(); ++s) {
    for (int j = 0; j < kVggStageConvs[s]; ++j) {
      if (static_cast<int>(layers.size()) == max_layers) return layers;
      typename FeatureExtractor<T>::Layer layer;
      layer.conv = nn::Conv2d<T>(in, widths[s], 3);
      layer.pool_after = (j + 1 == kVggStageConvs[s]);
      layers.push_back(std::move(layer));
      in = widths[s];
    }
  }
  return layers;
}

template <typename T>
std::array<T, 3> to_array(const std::array<double, 3>& a) {
  return {static_cast<T>(a[0]), static_cast<T>(a[1]), static_cast<T>(a[2])};
}

}  // namespace detail

/// Seeded, frozen random stand-in for the pretrained extractor: 13
/// convolutions in the same stage/pooling pattern with narrow widths.
template <typename T>
FeatureExtractor<T> make_random_extractor(std::uint64_t seed,
                                          std::vector<int> taps = default_taps()) {
  constexpr std::array<int, 5> widths{8, 16, 32, 32, 32};
  auto layers = detail::staged_layers<T>(widths, 13);
  nn::Rng rng(seed);
  for (auto& l : layers) l.conv.init(rng);
  return FeatureExtractor<T>(std::move(layers), std::move(taps), detail::to_array<T>(kImageNetMean),
                             detail::to_array<T>(kImageNetStd));
}

/// Reads the 16-convolution classification network from a checkpoint
/// container: tensors `features.conv{k}.weight|bias`, metadata `norm_mean`,
/// `norm_std`.
template <typename T>
FeatureExtractor<T> extractor_from_checkpoint(const train::Checkpoint& ckpt,
                                              std::vector<int> taps = default_taps()) {
  auto layers = detail::staged_layers<T>(detail::kVggStageWidths, 16);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string base = "features.conv" + std::to_string(i + 1);
    ckpt.get(base + ".weight", layers[i].conv.weight);
    ckpt.get(base + ".bias", layers[i].conv.bias);
  }
  auto read3 = [&](const char* key) {
    const auto& meta = ckpt.metadata;
    if (!meta.contains(key) || !meta[key].is_array() || meta[key].size() != 3) {
      throw FormatError(std::string("extractor weights missing metadata '") + key + "'");
    }
    std::array<T, 3> out{};
    for (int i = 0; i < 3; ++i) out[i] = static_cast<T>(meta[key][i].template get<double>());
    return out;
  };
  return FeatureExtractor<T>(std::move(layers), std::move(taps), read3("norm_mean"), read3("norm_std"));
}

template <typename T>
FeatureExtractor<T> load_pretrained_extractor(const std::filesystem::path& path,
                                              std::vector<int> taps = default_taps()) {
  return extractor_from_checkpoint<T>(train::load_checkpoint(path), std::move(taps));
}

/// Writes an extractor's weights in the pretrained layout (used to build
/// fixtures and to export converted weights).
template <typename T>
train::Checkpoint extractor_to_checkpoint(FeatureExtractor<T>& g) {
  train::Checkpoint ckpt;
  store_params(ckpt, g, "features");
  const auto m = g.norm_mean();
  const auto s = g.norm_std();
  ckpt.metadata["norm_mean"] = {m[0], m[1], m[2]};
  ckpt.metadata["norm_std"] = {s[0], s[1], s[2]};
  return ckpt;
}

}  // namespace aecr::contrast
