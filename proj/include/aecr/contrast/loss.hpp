#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aecr/contrast/extractor.hpp"

namespace aecr::contrast {

/// Weights and sampling for the contrastive regularizer.
struct LossConfig {
  double beta = 0.1;
  std::vector<double> omega{1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0};
  std::vector<int> taps = default_taps();
  int n_pos = 1;
  int n_neg = 1;
  double epsilon = 1e-7;
  /// false: the negative-distance denominator is replaced by 1 (positive-only ablation).
  bool use_negatives = true;

  void validate() const {
    if (!(beta >= 0)) throw ConfigError("beta must be >= 0", "loss.beta");
    if (omega.size() != taps.size()) {
      throw ConfigError("omega needs one weight per tap (" + std::to_string(taps.size()) + ")",
                        "loss.omega");
    }
    for (double w : omega) {
      if (!(w > 0)) throw ConfigError("omega entries must be > 0", "loss.omega");
    }
    if (n_pos < 1) throw ConfigError("n_pos must be >= 1", "loss.n_pos");
    if (n_neg < 1) throw ConfigError("n_neg must be >= 1", "loss.n_neg");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0", "loss.epsilon");
  }
};

/// Anchor (restored), positives (clear) and negatives (hazy). positives[0]
/// and negatives[0] are the anchor's own ground truth and hazy input.
/// All tensors may be batches; distances then average over the batch.
template <typename T>
struct ContrastSample {
  Tensor<T> anchor;
  std::vector<Tensor<T>> positives;
  std::vector<Tensor<T>> negatives;

  void validate() const {
    if (positives.empty()) throw ConfigError("contrast sample has no positives", "loss.n_pos");
    if (negatives.empty()) throw ConfigError("contrast sample has no negatives", "loss.n_neg");
    for (const auto& p : positives) Tensor<T>::require_same_shape(anchor, p, "contrast positive");
    for (const auto& n : negatives) Tensor<T>::require_same_shape(anchor, n, "contrast negative");
  }
};

/// Per-tap pieces of the regularizer, kept for logging and tests.
template <typename T>
struct CrBreakdown {
  T value = 0;
  std::vector<T> positive_distance;
  std::vector<T> negative_distance;
};

/// Mean absolute difference.
template <typename T>
T mean_l1(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T>::require_same_shape(a, b, "L1 distance");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  return static_cast<T>(acc / static_cast<double>(a.size()));
}

/// Adds scale * sign(a - b) into g.
template <typename T>
void add_l1_grad(const Tensor<T>& a, const Tensor<T>& b, T scale, Tensor<T>& g) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    if (d > T(0)) g[i] += scale;
    else if (d < T(0)) g[i] -= scale;
  }
}

/// sum_i omega_i * Dpos_i / max(Dneg_i, eps), where Dpos_i (Dneg_i) is the
/// mean over positives (negatives) of the mean-L1 distance between tap i
/// features of the anchor and of that sample. When `grad_anchor` is given it
/// receives d(term)/d(anchor).
template <typename T>
CrBreakdown<T> cr_term(const ContrastSample<T>& s, const FeatureExtractor<T>& g,
                       const LossConfig& cfg, Tensor<T>* grad_anchor = nullptr) {
  s.validate();
  if (cfg.omega.size() != g.num_taps()) {
    throw ConfigError("omega needs one weight per extractor tap", "loss.omega");
  }
  const std::size_t taps = g.num_taps();
  typename FeatureExtractor<T>::Cache cache;
  const auto fa = g.extract(s.anchor, grad_anchor ? &cache : nullptr);

  auto features = [&](const std::vector<Tensor<T>>& set) {
    std::vector<std::vector<Tensor<T>>> out;
    out.reserve(set.size());
    for (const auto& img : set) out.push_back(g.extract(img));
    return out;
  };
  const auto fp = features(s.positives);
  const bool use_neg = cfg.use_negatives;
  const auto fn = use_neg ? features(s.negatives) : std::vector<std::vector<Tensor<T>>>{};

  CrBreakdown<T> out;
  out.positive_distance.assign(taps, T(0));
  out.negative_distance.assign(taps, T(0));
  std::vector<Tensor<T>> tap_grads;
  const T eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < taps; ++i) {
    T dpos = 0;
    for (const auto& f : fp) dpos += mean_l1(fa[i], f[i]);
    dpos /= static_cast<T>(fp.size());
    T dneg = 1;
    if (use_neg) {
      dneg = 0;
      for (const auto& f : fn) dneg += mean_l1(fa[i], f[i]);
      dneg /= static_cast<T>(fn.size());
    }
    out.positive_distance[i] = dpos;
    out.negative_distance[i] = dneg;
    const T den = use_neg ? std::max(dneg, eps) : T(1);
    const T w = static_cast<T>(cfg.omega[i]);
    out.value += w * (dpos / den);

    if (grad_anchor) {
      Tensor<T> gt(fa[i].shape());
      const T numel = static_cast<T>(fa[i].size());
      const T pos_scale = w / (den * numel * static_cast<T>(fp.size()));
      for (const auto& f : fp) add_l1_grad(fa[i], f[i], pos_scale, gt);
      if (use_neg && dneg > eps) {
        const T neg_scale = -w * dpos / (den * den * numel * static_cast<T>(fn.size()));
        for (const auto& f : fn) add_l1_grad(fa[i], f[i], neg_scale, gt);
      }
      tap_grads.push_back(std::move(gt));
    }
  }
  if (grad_anchor) *grad_anchor = g.backward(s.anchor.shape(), cache, tap_grads);
  return out;
}

/// Direct single-triplet evaluation of the weighted ratio sum; reference
/// path for the multi-sample aggregation above.
template <typename T>
T cr_term_single(const Tensor<T>& anchor, const Tensor<T>& positive, const Tensor<T>& negative,
                 const FeatureExtractor<T>& g, const LossConfig& cfg) {
  const auto fa = g.extract(anchor);
  const auto fp = g.extract(positive);
  const auto fn = g.extract(negative);
  T value = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const T num = mean_l1(fa[i], fp[i]);
    const T den = cfg.use_negatives ? std::max(mean_l1(fa[i], fn[i]), static_cast<T>(cfg.epsilon)) : T(1);
    value += static_cast<T>(cfg.omega[i]) * (num / den);
  }
  return value;
}

template <typename T>
struct LossValue {
  T total = 0;
  T recon = 0;
  T cr = 0;
};

/// mean-L1(anchor, positives[0]) + beta * cr_term. With beta = 0 the
/// regularizer (and its extractor passes) is skipped entirely.
template <typename T>
LossValue<T> total_loss(const ContrastSample<T>& s, const FeatureExtractor<T>& g,
                        const LossConfig& cfg, Tensor<T>* grad_anchor = nullptr) {
  s.validate();
  LossValue<T> out;
  out.recon = mean_l1(s.anchor, s.positives.front());
  if (grad_anchor) {
    *grad_anchor = Tensor<T>(s.anchor.shape());
    add_l1_grad(s.anchor, s.positives.front(), T(1) / static_cast<T>(s.anchor.size()), *grad_anchor);
  }
  out.total = out.recon;
  if (cfg.beta == 0) return out;

  const T beta = static_cast<T>(cfg.beta);
  Tensor<T> gcr;
  out.cr = cr_term(s, g, cfg, grad_anchor ? &gcr : nullptr).value;
  out.total = out.recon + beta * out.cr;
  if (grad_anchor) {
    for (std::size_t i = 0; i < gcr.size(); ++i) (*grad_anchor)[i] += beta * gcr[i];
  }
  return out;
}

/// Convenience form: own clear image as the only positive.
template <typename T>
LossValue<T> total_loss(const Tensor<T>& restored, const Tensor<T>& clear,
                        const std::vector<Tensor<T>>& negatives, const FeatureExtractor<T>& g,
                        const LossConfig& cfg, Tensor<T>* grad_anchor = nullptr) {
  return total_loss(ContrastSample<T>{restored, {clear}, negatives}, g, cfg, grad_anchor);
}

}  // namespace aecr::contrast
