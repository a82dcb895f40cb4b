#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "aecr/contrast/loss.hpp"
#include "aecr/network/config.hpp"

namespace aecr::train {

using nlohmann::json;

/// Optimization hyperparameters plus the network and loss they train.
struct TrainConfig {
  double lr0 = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 16;
  int epochs = 100;
  int crop_size = 240;
  std::uint64_t seed = 0;
  int log_every = 50;
  int checkpoint_every = 1;  // epochs
  double grad_clip = 0;      // 0 disables
  contrast::LossConfig loss;
  network::NetworkConfig network;

  void validate() const {
    network.validate();
    loss.validate();
    if (!(lr0 > 0)) throw ConfigError("lr0 must be > 0", "train.lr0");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw ConfigError("adam_beta1 must lie in [0, 1)", "train.adam_beta1");
    if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam_beta2 must lie in [0, 1)", "train.adam_beta2");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1", "train.batch_size");
    if (epochs < 1) throw ConfigError("epochs must be >= 1", "train.epochs");
    if (crop_size < 4 || crop_size % 4 != 0) {
      throw ConfigError("crop_size must be a positive multiple of 4", "train.crop_size");
    }
    if (log_every < 1) throw ConfigError("log_every must be >= 1", "train.log_every");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1", "train.checkpoint_every");
    if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be >= 0", "train.grad_clip");
    if (loss.n_pos > batch_size) throw ConfigError("n_pos exceeds train.batch_size", "loss.n_pos");
    if (loss.n_neg > batch_size) throw ConfigError("n_neg exceeds train.batch_size", "loss.n_neg");
  }
};

struct DataConfig {
  std::string train_hazy;
  std::string train_clear;
};

/// Either a pretrained weights file or a seeded random test extractor.
struct ExtractorConfig {
  std::string pretrained;
  std::optional<std::uint64_t> random_seed;
};

/// Full document accepted by the CLI: network, loss, train, data, extractor.
struct RunConfig {
  TrainConfig train;
  DataConfig data;
  ExtractorConfig extractor{{}, 0};
};

namespace detail {

/// Reads keys of one JSON object, tracking the dotted path for errors and
/// rejecting keys that were never consumed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("expected an object", path_);
  }

  template <typename V>
  void read(const char* key, V& out) {
    used_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<V>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type", field(key));
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& raw(const char* key) {
    used_.insert(key);
    return obj_.at(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown key", field(k));
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

inline json to_json(const network::NetworkConfig& c) {
  return {{"base_width", c.base_width},
          {"width_schedule", c.width_schedule},
          {"num_fa_blocks", c.num_fa_blocks},
          {"use_mixup", c.use_mixup},
          {"use_dfe", c.use_dfe},
          {"use_plain_skip", c.use_plain_skip},
          {"upsample_mode", network::to_string(c.upsample_mode)},
          {"dfe_placement", network::to_string(c.dfe_placement)}};
}

inline network::NetworkConfig network_from_json(const json& j, const std::string& path = "network") {
  detail::ObjectReader r(j, path);
  network::NetworkConfig c;
  r.read("base_width", c.base_width);
  c.width_schedule = {c.base_width, 2 * c.base_width};
  if (!r.has("base_width")) c.width_schedule = network::NetworkConfig{}.width_schedule;
  if (r.has("width_schedule")) {
    std::vector<int> ws;
    r.read("width_schedule", ws);
    if (ws.size() != 2) throw ConfigError("width_schedule needs exactly 2 entries", r.field("width_schedule"));
    c.width_schedule = {ws[0], ws[1]};
  }
  r.read("num_fa_blocks", c.num_fa_blocks);
  r.read("use_mixup", c.use_mixup);
  r.read("use_dfe", c.use_dfe);
  r.read("use_plain_skip", c.use_plain_skip);
  std::string up = network::to_string(c.upsample_mode);
  r.read("upsample_mode", up);
  if (up == "transposed_conv") c.upsample_mode = network::UpsampleMode::TransposedConv;
  else if (up == "nearest_conv") c.upsample_mode = network::UpsampleMode::NearestConv;
  else throw ConfigError("expected transposed_conv or nearest_conv", r.field("upsample_mode"));
  std::string place = network::to_string(c.dfe_placement);
  r.read("dfe_placement", place);
  if (place == "after_blocks") c.dfe_placement = network::DfePlacement::AfterBlocks;
  else if (place == "before_blocks") c.dfe_placement = network::DfePlacement::BeforeBlocks;
  else throw ConfigError("expected after_blocks or before_blocks", r.field("dfe_placement"));
  r.finish();
  return c;
}

inline json to_json(const contrast::LossConfig& c) {
  return {{"beta", c.beta},   {"omega", c.omega},     {"taps", c.taps},
          {"n_pos", c.n_pos}, {"n_neg", c.n_neg},     {"epsilon", c.epsilon},
          {"use_negatives", c.use_negatives}};
}

inline contrast::LossConfig loss_from_json(const json& j, const std::string& path = "loss") {
  detail::ObjectReader r(j, path);
  contrast::LossConfig c;
  r.read("beta", c.beta);
  r.read("omega", c.omega);
  r.read("taps", c.taps);
  r.read("n_pos", c.n_pos);
  r.read("n_neg", c.n_neg);
  r.read("epsilon", c.epsilon);
  r.read("use_negatives", c.use_negatives);
  r.finish();
  return c;
}

inline json to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"crop_size", c.crop_size},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"grad_clip", c.grad_clip}};
}

inline void read_train_section(const json& j, TrainConfig& c, const std::string& path = "train") {
  detail::ObjectReader r(j, path);
  r.read("lr0", c.lr0);
  r.read("adam_beta1", c.adam_beta1);
  r.read("adam_beta2", c.adam_beta2);
  r.read("batch_size", c.batch_size);
  r.read("epochs", c.epochs);
  r.read("crop_size", c.crop_size);
  r.read("seed", c.seed);
  r.read("log_every", c.log_every);
  r.read("checkpoint_every", c.checkpoint_every);
  r.read("grad_clip", c.grad_clip);
  r.finish();
}

inline json to_json(const RunConfig& c) {
  json ex = json::object();
  if (!c.extractor.pretrained.empty()) ex["pretrained"] = c.extractor.pretrained;
  else ex["random"] = c.extractor.random_seed.value_or(0);
  return {{"network", to_json(c.train.network)},
          {"loss", to_json(c.train.loss)},
          {"train", to_json(c.train)},
          {"data", {{"train_hazy", c.data.train_hazy}, {"train_clear", c.data.train_clear}}},
          {"extractor", ex}};
}

/// Parses and validates a run config; ConfigError::field() names the
/// offending dotted path.
inline RunConfig run_config_from_json(const json& j) {
  detail::ObjectReader r(j, "");
  RunConfig c;
  if (r.has("network")) c.train.network = network_from_json(r.raw("network"));
  if (r.has("loss")) c.train.loss = loss_from_json(r.raw("loss"));
  if (r.has("train")) read_train_section(r.raw("train"), c.train);
  if (r.has("data")) {
    detail::ObjectReader d(r.raw("data"), "data");
    d.read("train_hazy", c.data.train_hazy);
    d.read("train_clear", c.data.train_clear);
    d.finish();
  }
  if (r.has("extractor")) {
    detail::ObjectReader e(r.raw("extractor"), "extractor");
    if (e.has("pretrained") == e.has("random")) {
      throw ConfigError("set exactly one of pretrained or random", "extractor");
    }
    c.extractor = {};
    if (e.has("pretrained")) e.read("pretrained", c.extractor.pretrained);
    if (e.has("random")) {
      std::uint64_t seed = 0;
      e.read("random", seed);
      c.extractor.random_seed = seed;
    }
    e.finish();
  }
  r.finish();
  if (c.train.loss.taps.size() != c.train.loss.omega.size()) {
    throw ConfigError("omega needs one weight per tap", "loss.omega");
  }
  c.train.validate();
  return c;
}

}  // namespace aecr::train
