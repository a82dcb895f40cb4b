#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "aecr/contrast/loss.hpp"

namespace aecr::contrast {

/// Batch indices chosen for one anchor. Index 0 of each list is the anchor.
struct ContrastIndices {
  std::vector<int> positives;
  std::vector<int> negatives;
};

/// Draws the extra negatives without replacement from the other batch
/// members; extra positives are the clear images of those same members, in
/// draw order (continuing the draw when n_pos > n_neg).
template <typename Rng>
ContrastIndices sample_contrast_indices(int batch_size, int anchor_index, int n_pos, int n_neg,
                                        Rng& rng) {
  if (n_pos < 1 || n_neg < 1) throw ConfigError("sample counts must be >= 1", "loss.n_pos");
  if (n_pos > batch_size) throw ConfigError("n_pos exceeds batch size", "loss.n_pos");
  if (n_neg > batch_size) throw ConfigError("n_neg exceeds batch size", "loss.n_neg");
  if (anchor_index < 0 || anchor_index >= batch_size) throw InputError("anchor index out of range");

  const int extra = std::max(n_pos, n_neg) - 1;
  std::vector<int> others;
  if (extra > 0) {
    others.reserve(batch_size - 1);
    for (int i = 0; i < batch_size; ++i) {
      if (i != anchor_index) others.push_back(i);
    }
    // Partial Fisher-Yates: the first `extra` slots become the draw.
    for (int i = 0; i < extra; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(others.size()) - 1);
      std::swap(others[i], others[pick(rng)]);
    }
  }
  ContrastIndices out;
  out.positives.push_back(anchor_index);
  out.negatives.push_back(anchor_index);
  for (int i = 0; i < n_pos - 1; ++i) out.positives.push_back(others[i]);
  for (int i = 0; i < n_neg - 1; ++i) out.negatives.push_back(others[i]);
  return out;
}

/// Builds the positives/negatives for one anchor from a batch. The anchor
/// itself (the restored image) is attached by the caller.
template <typename T, typename Rng>
ContrastSample<T> sample_contrast(const Tensor<T>& batch_hazy, const Tensor<T>& batch_clear,
                                  int anchor_index, const LossConfig& cfg, Rng& rng) {
  Tensor<T>::require_same_shape(batch_hazy, batch_clear, "sample_contrast");
  const auto idx = sample_contrast_indices(batch_hazy.n(), anchor_index, cfg.n_pos, cfg.n_neg, rng);
  ContrastSample<T> s;
  for (int i : idx.positives) s.positives.push_back(batch_clear.slice_batch(i, 1));
  for (int i : idx.negatives) s.negatives.push_back(batch_hazy.slice_batch(i, 1));
  return s;
}

/// Batched form used by training: sample j of positives[k] is the k-th
/// positive of anchor j (likewise for negatives), so one extractor pass
/// covers the whole batch.
template <typename T, typename Rng>
ContrastSample<T> sample_contrast_batch(const Tensor<T>& restored, const Tensor<T>& batch_hazy,
                                        const Tensor<T>& batch_clear, const LossConfig& cfg,
                                        Rng& rng) {
  Tensor<T>::require_same_shape(batch_hazy, batch_clear, "sample_contrast");
  Tensor<T>::require_same_shape(restored, batch_clear, "sample_contrast");
  const int n = restored.n();
  std::vector<ContrastIndices> picks;
  picks.reserve(n);
  for (int a = 0; a < n; ++a) {
    picks.push_back(sample_contrast_indices(n, a, cfg.n_pos, cfg.n_neg, rng));
  }
  auto gather = [&](const Tensor<T>& src, auto member, int count) {
    std::vector<Tensor<T>> out;
    for (int k = 0; k < count; ++k) {
      Tensor<T> t(src.shape());
      const std::size_t per = src.shape().numel() / n;
      for (int a = 0; a < n; ++a) {
        const int from = (picks[a].*member)[k];
        std::copy_n(src.sample(from), per, t.sample(a));
      }
      out.push_back(std::move(t));
    }
    return out;
  };
  ContrastSample<T> s;
  s.anchor = restored;
  s.positives = gather(batch_clear, &ContrastIndices::positives, cfg.n_pos);
  s.negatives = gather(batch_hazy, &ContrastIndices::negatives, cfg.n_neg);
  return s;
}

}  // namespace aecr::contrast
