#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aecr/data/haze.hpp"
#include "aecr/data/image_io.hpp"

namespace aecr::data {

/// Aligned hazy/clear images of identical 1 x 3 x H x W shape.
template <typename T = float>
struct ImagePair {
  Tensor<T> hazy;
  Tensor<T> clear;
  std::string id;
};

template <typename T = float>
using Dataset = std::vector<ImagePair<T>>;

/// Clear-image stem for a hazy file: "<id>_<k>" maps to "<id>"; the exact
/// stem is the fallback.
inline std::vector<std::string> clear_stem_candidates(const std::string& hazy_stem) {
  std::vector<std::string> out;
  const auto us = hazy_stem.find('_');
  if (us != std::string::npos && us > 0) out.push_back(hazy_stem.substr(0, us));
  out.push_back(hazy_stem);
  return out;
}

/// Pairs every hazy image with its clear counterpart (sorted by hazy file name).
template <typename T = float>
Dataset<T> load_paired_dataset(const std::filesystem::path& hazy_dir,
                               const std::filesystem::path& clear_dir) {
  const auto hazy_files = list_images(hazy_dir);
  const auto clear_files = list_images(clear_dir);
  if (hazy_files.empty()) {
    std::cerr << "warning: no images in " << hazy_dir.string() << "\n";
    return {};
  }
  std::map<std::string, std::filesystem::path> clear_by_stem;
  for (const auto& p : clear_files) clear_by_stem.emplace(p.stem().string(), p);

  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> matches;
  std::vector<std::string> orphans;
  for (const auto& h : hazy_files) {
    const std::filesystem::path* found = nullptr;
    for (const auto& stem : clear_stem_candidates(h.stem().string())) {
      auto it = clear_by_stem.find(stem);
      if (it != clear_by_stem.end()) {
        found = &it->second;
        break;
      }
    }
    if (found) matches.emplace_back(h, *found);
    else orphans.push_back(h.filename().string());
  }
  if (!orphans.empty()) {
    std::string msg = "hazy images without a clear counterpart:";
    for (const auto& o : orphans) msg += " " + o;
    throw InputError(msg);
  }

  std::map<std::string, Tensor<T>> clear_cache;
  Dataset<T> out;
  out.reserve(matches.size());
  for (const auto& [h, c] : matches) {
    auto it = clear_cache.find(c.string());
    if (it == clear_cache.end()) it = clear_cache.emplace(c.string(), read_image<T>(c)).first;
    ImagePair<T> pair{read_image<T>(h), it->second, h.stem().string()};
    if (pair.hazy.shape() != pair.clear.shape()) {
      throw InputError("size mismatch between " + h.filename().string() + " and " +
                       c.filename().string());
    }
    out.push_back(std::move(pair));
  }
  return out;
}

/// Same crop window and flip decision for both images of the pair.
template <typename T, typename Rng>
ImagePair<T> random_crop_flip(const ImagePair<T>& pair, int size, Rng& rng) {
  const int h = pair.hazy.h();
  const int w = pair.hazy.w();
  if (size < 4 || size % 4 != 0) throw InputError("crop size must be a positive multiple of 4");
  if (size > h || size > w) {
    throw InputError("crop size " + std::to_string(size) + " exceeds image " + pair.hazy.shape().str());
  }
  std::uniform_int_distribution<int> dy(0, h - size);
  std::uniform_int_distribution<int> dx(0, w - size);
  std::bernoulli_distribution flip(0.5);
  const int oy = dy(rng);
  const int ox = dx(rng);
  const bool mirror = flip(rng);

  auto crop = [&](const Tensor<T>& src) {
    Tensor<T> out(1, src.c(), size, size);
    for (int c = 0; c < src.c(); ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const int sx = mirror ? ox + size - 1 - x : ox + x;
          out.at(0, c, y, x) = src.at(0, c, oy + y, sx);
        }
    return out;
  };
  return {crop(pair.hazy), crop(pair.clear), pair.id};
}

/// Options for writing a synthetic paired set.
struct SynthOptions {
  std::uint64_t seed = 0;
  double a_min = 0.7, a_max = 1.0;
  double t_min = 0.3, t_max = 0.8;
  /// 0: scalar transmission per image; otherwise a smooth field from an
  /// n x n lattice.
  int field_nodes = 0;
};

/// Hazes every clear image in `clear_dir`; writes `<out>/hazy/<id>_1.png`,
/// `<out>/clear/<id>.png` and `<out>/params.json` with every draw.
/// Returns the params document.
inline nlohmann::json synthesize_directory(const std::filesystem::path& clear_dir,
                                           const std::filesystem::path& out_dir,
                                           const SynthOptions& opt) {
  const auto files = list_images(clear_dir);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> a_dist(opt.a_min, opt.a_max);
  std::uniform_real_distribution<double> t_dist(opt.t_min, opt.t_max);
  std::filesystem::create_directories(out_dir / "hazy");
  std::filesystem::create_directories(out_dir / "clear");

  nlohmann::json doc;
  doc["seed"] = opt.seed;
  doc["mode"] = opt.field_nodes > 0 ? "field" : "scalar";
  doc["images"] = nlohmann::json::array();
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    const auto clear = read_image<double>(f);
    HazeParams hp;
    hp.atmospheric_light = a_dist(rng);
    nlohmann::json rec{{"id", id}, {"A", hp.atmospheric_light}};
    if (opt.field_nodes > 0) {
      auto grid = random_transmission_grid(opt.field_nodes, opt.t_min, opt.t_max, rng);
      hp.transmission_field = transmission_from_grid(grid, clear.h(), clear.w());
      rec["t_grid"] = grid;
    } else {
      hp.transmission = t_dist(rng);
      rec["t"] = hp.transmission;
    }
    write_image(out_dir / "clear" / (id + ".png"), clear);
    write_image(out_dir / "hazy" / (id + "_1.png"), synthesize_haze(clear, hp));
    doc["images"].push_back(std::move(rec));
  }
  std::ofstream(out_dir / "params.json") << doc.dump(2) << "\n";
  return doc;
}

/// Rebuilds the HazeParams recorded for one image of a params.json document.
inline HazeParams haze_params_from_record(const nlohmann::json& rec, int height, int width) {
  HazeParams hp;
  hp.atmospheric_light = rec.at("A").get<double>();
  if (rec.contains("t_grid")) {
    hp.transmission_field =
        transmission_from_grid(rec.at("t_grid").get<std::vector<std::vector<double>>>(), height, width);
  } else {
    hp.transmission = rec.at("t").get<double>();
  }
  return hp;
}

}  // namespace aecr::data
