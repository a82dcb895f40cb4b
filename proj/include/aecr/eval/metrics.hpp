#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aecr/data/image_io.hpp"

namespace aecr::eval {

/// Reported for identical images instead of +inf.
inline constexpr double kPsnrIdentical = 100.0;

/// 10 log10(range^2 / MSE) over every element of the batch.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double data_range = 1.0) {
  if (a.shape() != b.shape()) {
    throw InputError("psnr: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(data_range * data_range / mse);
}

namespace detail {

inline constexpr int kWindow = 11;
inline constexpr double kSigma = 1.5;

inline std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-(d * d) / (2 * kSigma * kSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// Separable Gaussian filter keeping only fully-covered ("valid") outputs.
inline std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  static const auto win = gaussian_window();
  const int wo = w - kWindow + 1;
  const int ho = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * wo);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += win[k] * img[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * wo + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += win[k] * tmp[static_cast<std::size_t>(y + k) * wo + x];
      out[static_cast<std::size_t>(y) * wo + x] = s;
    }
  return out;
}

}  // namespace detail

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, per channel, averaged over valid window positions, channels
/// and batch.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, double data_range = 1.0) {
  if (a.shape() != b.shape()) {
    throw InputError("ssim: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  if (a.h() < detail::kWindow || a.w() < detail::kWindow) {
    throw InputError("ssim: image " + a.shape().str() + " smaller than the 11x11 window");
  }
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const int h = a.h();
  const int w = a.w();
  const std::size_t plane = a.shape().plane();
  double total = 0;
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c) {
      std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
      const T* pa = a.plane(n, c);
      const T* pb = b.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        x[i] = static_cast<double>(pa[i]);
        y[i] = static_cast<double>(pb[i]);
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = detail::filter_valid(x, h, w);
      const auto my = detail::filter_valid(y, h, w);
      const auto sxx = detail::filter_valid(xx, h, w);
      const auto syy = detail::filter_valid(yy, h, w);
      const auto sxy = detail::filter_valid(xy, h, w);
      double acc = 0;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
      total += acc / static_cast<double>(mx.size());
    }
  }
  return total / static_cast<double>(a.n() * a.c());
}

struct ImageMetric {
  std::string id;
  double psnr = 0;
  double ssim = 0;
};

struct MetricReport {
  std::vector<ImageMetric> per_image;
  double mean_psnr = 0;
  double mean_ssim = 0;

  void finalize() {
    mean_psnr = mean_ssim = 0;
    if (per_image.empty()) return;
    for (const auto& m : per_image) {
      mean_psnr += m.psnr;
      mean_ssim += m.ssim;
    }
    mean_psnr /= static_cast<double>(per_image.size());
    mean_ssim /= static_cast<double>(per_image.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["per_image"] = nlohmann::json::array();
    for (const auto& m : per_image) j["per_image"].push_back({{"id", m.id}, {"psnr", m.psnr}, {"ssim", m.ssim}});
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    return j;
  }
};

/// Scores every ground-truth image against the same-named prediction.
/// Ordering follows sorted ground-truth file names.
inline MetricReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  const auto gt_files = data::list_images(gt_dir);
  const auto pred_files = data::list_images(pred_dir);
  for (const auto& g : gt_files) {
    if (!std::filesystem::exists(pred_dir / g.filename())) {
      throw InputError("missing prediction for '" + g.stem().string() + "' (" +
                       (pred_dir / g.filename()).string() + ")");
    }
  }
  for (const auto& p : pred_files) {
    if (!std::filesystem::exists(gt_dir / p.filename())) {
      throw InputError("missing ground truth for '" + p.stem().string() + "' (" +
                       (gt_dir / p.filename()).string() + ")");
    }
  }
  MetricReport report;
  for (const auto& g : gt_files) {
    const auto truth = data::read_image<double>(g);
    const auto pred = data::read_image<double>(pred_dir / g.filename());
    report.per_image.push_back({g.stem().string(), psnr(pred, truth), ssim(pred, truth)});
  }
  report.finalize();
  return report;
}

inline void write_report(const MetricReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report " + path.string());
  out << r.to_json().dump(2) << "\n";
}

}  // namespace aecr::eval
