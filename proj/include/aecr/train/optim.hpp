#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "aecr/nn/param.hpp"
#include "aecr/train/checkpoint.hpp"

namespace aecr::train {

/// Cosine annealing: 0.5 * lr0 * (1 + cos(pi * step / total_steps)).
inline double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps <= 0) throw InputError("cosine_lr: total_steps must be > 0");
  if (step < 0 || step > total_steps) {
    throw InputError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates keyed by parameter name.
template <typename T>
struct AdamState {
  long step = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;

  void store(Checkpoint& ckpt) const {
    for (const auto& [name, mv] : moments) {
      const std::vector<int> dims{static_cast<int>(mv.first.size())};
      ckpt.put("optim.m." + name, dims, mv.first.vec());
      ckpt.put("optim.v." + name, dims, mv.second.vec());
    }
    ckpt.metadata["optim_step"] = step;
  }

  /// Restores moments for every parameter of `module`.
  template <typename Module>
  void load(const Checkpoint& ckpt, Module& module) {
    step = ckpt.metadata.value("optim_step", 0L);
    moments.clear();
    auto get = [&](const std::string& name, nn::Param<T>& p) {
      auto read = [&](const std::string& key) {
        const auto& rec = ckpt.at(key);
        if (rec.data.size() != p.numel()) throw FormatError("optimizer state size mismatch for '" + key + "'");
        Tensor<T> t(p.value.shape());
        for (std::size_t i = 0; i < rec.data.size(); ++i) t[i] = static_cast<T>(rec.data[i]);
        return t;
      };
      moments[name] = {read("optim.m." + name), read("optim.v." + name)};
    };
    module.visit(std::string{}, get);
  }
};

/// One bias-corrected Adam update over every parameter of `module`.
/// Throws TrainingError naming the first parameter with a non-finite gradient.
template <typename T, typename Module>
void adam_step(Module& module, AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
  auto check = [&](const std::string& name, nn::Param<T>& p) {
    for (T g : p.grad.vec()) {
      if (!std::isfinite(static_cast<double>(g))) throw TrainingError("non-finite gradient in '" + name + "'");
    }
  };
  module.visit(std::string{}, check);

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  auto update = [&](const std::string& name, nn::Param<T>& p) {
    auto it = state.moments.find(name);
    if (it == state.moments.end()) {
      it = state.moments.emplace(name, std::make_pair(Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape()))).first;
    }
    auto& [m, v] = it->second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  };
  module.visit(std::string{}, update);
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T, typename Module>
double clip_grad_norm(Module& module, double max_norm) {
  double sq = 0;
  auto acc = [&](const std::string&, nn::Param<T>& p) {
    for (T g : p.grad.vec()) sq += static_cast<double>(g) * g;
  };
  module.visit(std::string{}, acc);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    auto apply = [&](const std::string&, nn::Param<T>& p) { p.grad *= scale; };
    module.visit(std::string{}, apply);
  }
  return norm;
}

}  // namespace aecr::train
