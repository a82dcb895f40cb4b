#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "aecr/data/image_io.hpp"

namespace aecr::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("aecr-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Smooth seeded RGB test scene in [0, 1].
inline Tensor<float> make_scene(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<float> img(1, 3, h, w);
  for (int c = 0; c < 3; ++c) {
    const double a = u(rng), b = u(rng), f = 1 + 3 * u(rng), phase = 6.28 * u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = 0.5 + 0.2 * (a - 0.5) * y / h + 0.2 * (b - 0.5) * x / w +
                         0.25 * std::sin(f * (x + y) / double(w) * 3.14 + phase);
        img.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
  return img;
}

/// Writes `count` scenes as <dir>/<i>.png.
inline void write_scenes(const std::filesystem::path& dir, int count, int h, int w, std::uint64_t seed = 1) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    data::write_image(dir / (std::to_string(i) + ".png"), make_scene(h, w, seed * 1000 + i));
  }
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace aecr::test
