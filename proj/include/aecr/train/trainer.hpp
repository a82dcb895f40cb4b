#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "aecr/contrast/sampling.hpp"
#include "aecr/data/dataset.hpp"
#include "aecr/eval/metrics.hpp"
#include "aecr/network/dehaze_network.hpp"
#include "aecr/train/checkpoint.hpp"
#include "aecr/train/config.hpp"
#include "aecr/train/optim.hpp"

namespace aecr::train {

struct StepLog {
  long step = 0;
  double lr = 0;
  double recon = 0;
  double cr = 0;
  double total = 0;
};

struct TrainOptions {
  /// Checkpoints and metrics.csv go here; empty disables file output.
  std::filesystem::path out_dir;
  /// Stop once this many global steps have completed (resumable).
  std::optional<long> stop_at_step;
  /// Embedded verbatim in every checkpoint under "config".
  nlohmann::json run_config;
  std::function<void(const StepLog&)> on_step;
  std::ostream* log = &std::cerr;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> history;
  bool complete = false;
};

/// Per-step generator derived from (seed, step, stream) so that a resumed
/// run draws exactly what an uninterrupted one would.
inline nn::Rng derived_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(stream)};
  return nn::Rng(seq);
}

/// Optimizes mean-L1 + beta * contrastive regularizer with Adam and a
/// per-step cosine schedule.
template <typename T = float>
class Trainer {
 public:
  Trainer(TrainConfig cfg, const data::Dataset<T>& dataset, const contrast::FeatureExtractor<T>& extractor)
      : cfg_(std::move(cfg)), data_(dataset), extractor_(extractor), net_(cfg_.network) {
    cfg_.validate();
    if (data_.empty()) throw InputError("training dataset is empty");
    if (std::max(cfg_.loss.n_pos, cfg_.loss.n_neg) > batch_size()) {
      throw ConfigError("sample counts exceed the effective batch size " + std::to_string(batch_size()),
                        cfg_.loss.n_neg > batch_size() ? "loss.n_neg" : "loss.n_pos");
    }
    if (cfg_.loss.omega.size() != extractor_.num_taps()) {
      throw ConfigError("omega needs one weight per extractor tap", "loss.omega");
    }
    nn::Rng init_rng(cfg_.seed);
    net_.init(init_rng);
  }

  int batch_size() const { return std::min<int>(cfg_.batch_size, static_cast<int>(data_.size())); }
  long steps_per_epoch() const {
    return (static_cast<long>(data_.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
  }
  long total_steps() const { return steps_per_epoch() * cfg_.epochs; }
  long step() const { return step_; }
  bool complete() const { return step_ >= total_steps(); }

  network::DehazeNetwork<T>& network() { return net_; }
  const TrainConfig& config() const { return cfg_; }

  /// Restores parameters, optimizer moments and the step counter.
  void resume(const Checkpoint& ckpt) {
    load_params(ckpt, net_);
    adam_.load(ckpt, net_);
    step_ = ckpt.metadata.value("global_step", 0L);
  }

  Checkpoint snapshot(const nlohmann::json& run_config = {}) {
    Checkpoint ckpt;
    store_params(ckpt, net_);
    adam_.store(ckpt);
    ckpt.metadata["config"] = run_config.is_null() ? nlohmann::json{{"train", to_json(cfg_)},
                                                                    {"network", to_json(cfg_.network)},
                                                                    {"loss", to_json(cfg_.loss)}}
                                                   : run_config;
    ckpt.metadata["global_step"] = step_;
    ckpt.metadata["total_steps"] = total_steps();
    ckpt.metadata["epoch"] = step_ / steps_per_epoch();
    ckpt.metadata["rng"] = {{"seed", cfg_.seed}, {"next_step", step_}};
    ckpt.metadata["complete"] = complete();
    return ckpt;
  }

  /// The (hazy, clear) batch used at `step`, after augmentation.
  std::pair<Tensor<T>, Tensor<T>> batch_for_step(long step, nn::Rng& rng) const {
    const long epoch = step / steps_per_epoch();
    const long within = step % steps_per_epoch();
    std::vector<int> order(data_.size());
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = derived_rng(cfg_.seed, static_cast<std::uint64_t>(epoch), 1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<Tensor<T>> hazy, clear;
    const int b = batch_size();
    for (int i = 0; i < b; ++i) {
      const auto& pair = data_[order[(within * cfg_.batch_size + i) % order.size()]];
      auto crop = data::random_crop_flip(pair, cfg_.crop_size, rng);
      hazy.push_back(std::move(crop.hazy));
      clear.push_back(std::move(crop.clear));
    }
    return {stack_batch<T>(hazy), stack_batch<T>(clear)};
  }

  /// One optimization step; returns its log record.
  StepLog train_step() {
    auto rng = derived_rng(cfg_.seed, static_cast<std::uint64_t>(step_), 2);
    auto [hazy, clear] = batch_for_step(step_, rng);

    net_.zero_grad();
    typename network::DehazeNetwork<T>::Cache cache;
    Tensor<T> restored, grad;
    contrast::LossValue<T> loss;
    try {
      restored = net_.forward(hazy, &cache);
      const auto sample = contrast::sample_contrast_batch(restored, hazy, clear, cfg_.loss, rng);
      loss = contrast::total_loss(sample, extractor_, cfg_.loss, &grad);
    } catch (const InputError& e) {
      // Non-finite activations surface as invalid sampling coordinates.
      throw TrainingError("step " + std::to_string(step_) + ": " + e.what());
    }
    if (!std::isfinite(static_cast<double>(loss.total))) {
      std::ostringstream os;
      os << "non-finite loss at step " << step_ << ": recon=" << loss.recon << " cr=" << loss.cr;
      throw TrainingError(os.str());
    }
    net_.backward(cache, grad);
    if (cfg_.grad_clip > 0) clip_grad_norm<T>(net_, cfg_.grad_clip);
    const double lr = cosine_lr(step_, total_steps(), cfg_.lr0);
    adam_step(net_, adam_, lr, AdamConfig{cfg_.adam_beta1, cfg_.adam_beta2, 1e-8});

    last_psnr_ = eval::psnr(restored, clear);
    StepLog rec{step_, lr, static_cast<double>(loss.recon), static_cast<double>(loss.cr),
                static_cast<double>(loss.total)};
    ++step_;
    return rec;
  }

  TrainResult run(const TrainOptions& opt = {}) {
    TrainResult result;
    const long stop = std::min(total_steps(), opt.stop_at_step.value_or(total_steps()));
    std::ofstream csv;
    if (!opt.out_dir.empty()) {
      std::filesystem::create_directories(opt.out_dir);
      const auto path = opt.out_dir / "metrics.csv";
      const bool fresh = step_ == 0 || !std::filesystem::exists(path);
      csv.open(path, fresh ? std::ios::trunc : std::ios::app);
      if (fresh) csv << "step,lr,recon_loss,cr_loss,total\n";
      csv << std::setprecision(9);
    }
    while (step_ < stop) {
      const StepLog rec = train_step();
      result.history.push_back(rec);
      if (csv.is_open()) {
        csv << rec.step << ',' << rec.lr << ',' << rec.recon << ',' << rec.cr << ',' << rec.total << '\n';
      }
      if (opt.on_step) opt.on_step(rec);
      if (opt.log && (rec.step % cfg_.log_every == 0 || step_ == total_steps())) {
        *opt.log << "step " << rec.step << " lr " << rec.lr << " recon " << rec.recon << " cr " << rec.cr
                 << " total " << rec.total << " psnr " << last_psnr_ << "\n";
      }
      const bool epoch_end = step_ % steps_per_epoch() == 0;
      if (!opt.out_dir.empty() && epoch_end && (step_ / steps_per_epoch()) % cfg_.checkpoint_every == 0 &&
          step_ < total_steps()) {
        save_checkpoint(snapshot(opt.run_config), opt.out_dir / "last.aecr");
      }
    }
    result.checkpoint = snapshot(opt.run_config);
    result.complete = complete();
    if (!opt.out_dir.empty()) {
      save_checkpoint(result.checkpoint, opt.out_dir / (result.complete ? "final.aecr" : "last.aecr"));
    }
    return result;
  }

 private:
  TrainConfig cfg_;
  const data::Dataset<T>& data_;
  const contrast::FeatureExtractor<T>& extractor_;
  network::DehazeNetwork<T> net_;
  AdamState<T> adam_;
  long step_ = 0;
  double last_psnr_ = 0;
};

/// Mean PSNR of the network's clamped output over whole images.
template <typename T>
double dataset_psnr(const network::DehazeNetwork<T>& net, const data::Dataset<T>& ds) {
  double acc = 0;
  for (const auto& p : ds) acc += eval::psnr(net.infer(p.hazy), p.clear);
  return ds.empty() ? 0.0 : acc / static_cast<double>(ds.size());
}

}  // namespace aecr::train
