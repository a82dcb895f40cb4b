#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "aecr/core/tensor.hpp"

namespace aecr::data {

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Sorted list of PNG/JPEG files directly inside `dir`.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Decodes an 8-bit image into a (1, 3, H, W) RGB tensor in [0, 1].
template <typename T = float>
Tensor<T> read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw FormatError("cannot decode image " + path.string());
  if (bgr.depth() != CV_8U) throw FormatError("only 8-bit images are supported: " + path.string());
  Tensor<T> out(1, 3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = static_cast<T>(row[x][2 - c]) / T(255);
    }
  }
  return out;
}

/// Quantizes sample `n` of an RGB tensor (clamped to [0, 1]) to 8 bits.
template <typename T>
cv::Mat to_mat(const Tensor<T>& img, int n = 0) {
  if (img.c() != 3) throw InputError("image tensors must have 3 channels, got " + img.shape().str());
  cv::Mat bgr(img.h(), img.w(), CV_8UC3);
  for (int y = 0; y < img.h(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.w(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(n, c, y, x)), 0.0, 1.0);
        row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  return bgr;
}

template <typename T>
void write_image(const std::filesystem::path& path, const Tensor<T>& img, int n = 0) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_mat(img, n))) {
    throw FormatError("cannot write image " + path.string());
  }
}

}  // namespace aecr::data
