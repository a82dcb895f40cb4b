#pragma once

#include <array>
#include <string>

#include "aecr/core/errors.hpp"

namespace aecr::network {

enum class UpsampleMode { TransposedConv, NearestConv };
enum class DfePlacement { AfterBlocks, BeforeBlocks };

/// Architecture hyperparameters and ablation switches.
struct NetworkConfig {
  int base_width = 64;
  std::array<int, 2> width_schedule{64, 128};
  int num_fa_blocks = 6;
  bool use_mixup = true;
  bool use_dfe = true;
  bool use_plain_skip = false;
  UpsampleMode upsample_mode = UpsampleMode::TransposedConv;
  DfePlacement dfe_placement = DfePlacement::AfterBlocks;

  /// Width of the low-resolution space (FA blocks, DFE).
  int bottleneck_width() const { return width_schedule[1]; }

  /// Sets base_width and the matching [w, 2w] stride-2 schedule.
  static NetworkConfig with_base_width(int w) {
    NetworkConfig cfg;
    cfg.base_width = w;
    cfg.width_schedule = {w, 2 * w};
    return cfg;
  }

  /// `allow_empty_trunk` admits num_fa_blocks = 0 (used by closed-form counts).
  void validate(bool allow_empty_trunk = false) const {
    if (base_width < 1) throw ConfigError("base_width must be >= 1", "network.base_width");
    for (int w : width_schedule) {
      if (w < 1) throw ConfigError("width_schedule entries must be >= 1", "network.width_schedule");
    }
    if (num_fa_blocks < (allow_empty_trunk ? 0 : 1)) {
      throw ConfigError("num_fa_blocks must be >= 1", "network.num_fa_blocks");
    }
    if (use_mixup && use_plain_skip) {
      throw ConfigError("use_mixup and use_plain_skip are mutually exclusive",
                        "network.use_plain_skip");
    }
  }

  bool operator==(const NetworkConfig&) const = default;
};

inline std::string to_string(UpsampleMode m) {
  return m == UpsampleMode::TransposedConv ? "transposed_conv" : "nearest_conv";
}
inline std::string to_string(DfePlacement p) {
  return p == DfePlacement::AfterBlocks ? "after_blocks" : "before_blocks";
}

}  // namespace aecr::network
