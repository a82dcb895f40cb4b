#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aecr/aecr.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace aecr::test {

struct CheckResult {
  std::string name;
  double value = 0;
  double limit = 0;
  bool ok = false;
};

inline bool all_ok(const std::vector<CheckResult>& rs) {
  for (const auto& r : rs) {
    if (!r.ok) return false;
  }
  return !rs.empty();
}

/// Largest |deformable - direct| over `draws` random zero-offset cases with
/// inputs up to 1x8x16x16.
inline double zero_offset_max_diff(int draws, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ch(1, 8);
  std::uniform_int_distribution<int> ext(1, 16);
  double worst = 0;
  for (int d = 0; d < draws; ++d) {
    const int in = ch(rng), out = ch(rng), h = ext(rng), w = ext(rng);
    deform::DeformConv2d<float> dcn(in, out);
    dcn.init(rng);
    auto bias = random_tensor<float>({1, 1, 1, out}, rng());
    std::copy(bias.vec().begin(), bias.vec().end(), dcn.bias.value.data());
    const auto x = random_tensor<float>({1, in, h, w}, rng());
    const auto y = dcn.forward(x);
    const auto ref = direct_conv(x, dcn.weight, dcn.bias);
    for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(double(y[i]) - ref[i]));
  }
  return worst;
}

namespace detail {

template <typename U>
struct Precision {
  using type = U;
};

inline std::string precision_label(std::size_t bytes) { return bytes == 4 ? "f32" : "f64"; }

/// Checks the input and every parameter gradient of a T-precision module
/// against central differences of a double-precision twin holding the same
/// parameter values. `make(Precision<U>{})` builds an initialized module.
template <typename T, typename Make>
void check_module(const std::string& label, Make make, const Tensor<double>& x64,
                  std::vector<CheckResult>& out, std::size_t coords = 48) {
  auto m = make(Precision<T>{});
  auto ref = make(Precision<double>{});
  copy_params(m, ref);

  const Tensor<T> x = x64.cast<T>();
  Tensor<double> xd = x.template cast<double>();
  typename decltype(m)::Cache cache;
  const auto y = m.forward(x, &cache);
  const Tensor<T> probe = random_tensor<double>(y.shape(), 99).template cast<T>();
  const Tensor<double> probe_d = probe.template cast<double>();
  auto zero = [](const std::string&, auto& p) { p.zero_grad(); };
  m.visit(std::string{}, zero);
  const auto gx = m.backward(cache, probe);

  auto loss = [&] { return weighted_sum(ref.forward(xd), probe_d); };
  const double tol = gradcheck_tolerance<T>();
  const std::string prec = precision_label(sizeof(T));
  auto r = check_gradient(xd, gx, loss, coords);
  out.push_back({label + " input " + prec, r.rel_error, tol, r.rel_error <= tol});

  std::vector<std::pair<std::string, nn::Param<T>*>> analytic;
  std::vector<nn::Param<double>*> numeric;
  auto collect = [&](const std::string& name, nn::Param<T>& p) { analytic.emplace_back(name, &p); };
  auto collect_ref = [&](const std::string&, nn::Param<double>& p) { numeric.push_back(&p); };
  m.visit(std::string{}, collect);
  ref.visit(std::string{}, collect_ref);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    auto rp = check_gradient(numeric[i]->value, analytic[i].second->grad, loss, coords);
    out.push_back({label + " " + analytic[i].first + " " + prec, rp.rel_error, tol, rp.rel_error <= tol});
  }
}

template <typename T>
void fa_block_checks(std::vector<CheckResult>& out) {
  auto make = [](auto tag) {
    using U = typename decltype(tag)::type;
    network::FaBlock<U> block(8);
    nn::Rng rng(5);
    block.init(rng);
    return block;
  };
  check_module<T>("fa_block", make, random_tensor<double>({1, 8, 8, 8}, 6), out);
}

template <typename T>
void deform_checks(std::vector<CheckResult>& out) {
  auto make = [](auto tag) {
    using U = typename decltype(tag)::type;
    deform::DeformConv2d<U> dcn(4, 4);
    nn::Rng rng(8);
    dcn.init(rng, U(0.1));
    // Small input-dependent offsets on top of the 0.1 bias.
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    for (auto& v : dcn.offset.weight.value.vec()) v = static_cast<U>(d(rng));
    return dcn;
  };
  check_module<T>("deform_conv", make, random_tensor<double>({1, 4, 8, 8}, 9), out);
}

template <typename T>
void network_checks(std::vector<CheckResult>& out) {
  auto make = [](auto tag) {
    using U = typename decltype(tag)::type;
    auto cfg = network::NetworkConfig::with_base_width(4);
    cfg.num_fa_blocks = 2;
    network::DehazeNetwork<U> net(cfg);
    nn::Rng rng(41);
    net.init(rng, U(0.1));
    net.mix1.theta.value[0] = U(0.3);
    net.mix2.theta.value[0] = U(-0.2);
    return net;
  };
  check_module<T>("network", make, random_tensor<double>({1, 3, 8, 8}, 42, 0, 1), out, 16);
}

template <typename T>
void mixup_checks(std::vector<CheckResult>& out) {
  const double tol = gradcheck_tolerance<T>();
  const std::string prec = precision_label(sizeof(T));
  const Tensor<T> fd = random_tensor<double>({1, 8, 8, 8}, 21).template cast<T>();
  const Tensor<T> fu = random_tensor<double>({1, 8, 8, 8}, 22).template cast<T>();
  const Tensor<T> probe = random_tensor<double>(fd.shape(), 23).template cast<T>();
  const T theta = T(0.3);
  const auto g = network::adaptive_mixup_backward(fd, fu, theta, probe);

  Tensor<double> fd64 = fd.template cast<double>(), fu64 = fu.template cast<double>();
  const Tensor<double> probe64 = probe.template cast<double>();
  double theta64 = theta;
  auto loss = [&] { return weighted_sum(network::adaptive_mixup(fd64, fu64, theta64), probe64); };
  auto r1 = check_gradient(fd64, g.f_down, loss);
  auto r2 = check_gradient(fu64, g.f_up, loss);
  auto r3 = check_gradient(&theta64, &g.theta, 1, loss);
  out.push_back({"mixup f_down " + prec, r1.rel_error, tol, r1.rel_error <= tol});
  out.push_back({"mixup f_up " + prec, r2.rel_error, tol, r2.rel_error <= tol});
  out.push_back({"mixup theta " + prec, r3.rel_error, tol, r3.rel_error <= tol});

  // Analytic form: sigma(0)(1 - sigma(0)) * (2 - 4) = -0.5 per element.
  Tensor<T> two({1, 2, 3, 3}, T(2)), four({1, 2, 3, 3}, T(4)), ones({1, 2, 3, 3}, T(1));
  const auto ga = network::adaptive_mixup_backward(two, four, T(0), ones);
  const double per_elem = static_cast<double>(ga.theta) / static_cast<double>(ones.size());
  const double err = std::abs(per_elem + 0.5);
  out.push_back({"mixup dtheta analytic " + prec, err, 1e-6, err <= 1e-6});
}

template <typename T>
void loss_checks(std::vector<CheckResult>& out) {
  const double tol = gradcheck_tolerance<T>();
  const std::string prec = precision_label(sizeof(T));
  auto g = contrast::make_random_extractor<T>(3);
  auto g64 = contrast::make_random_extractor<double>(3);
  copy_params(g, g64);
  contrast::LossConfig cfg;
  const Tensor<T> anchor = random_tensor<double>({1, 3, 16, 16}, 31, 0, 1).template cast<T>();
  const Tensor<T> clear = random_tensor<double>({1, 3, 16, 16}, 32, 0, 1).template cast<T>();
  const Tensor<T> hazy = random_tensor<double>({1, 3, 16, 16}, 33, 0, 1).template cast<T>();
  Tensor<T> grad;
  contrast::total_loss(anchor, clear, {hazy}, g, cfg, &grad);

  Tensor<double> a64 = anchor.template cast<double>();
  const Tensor<double> c64 = clear.template cast<double>(), h64 = hazy.template cast<double>();
  auto loss = [&] { return contrast::total_loss(a64, c64, {h64}, g64, cfg).total; };
  // Small step: the L1 distances are piecewise linear.
  auto r = check_gradient(a64, grad, loss, 64, 1e-7);
  out.push_back({"total_loss d/d(restored) " + prec, r.rel_error, tol, r.rel_error <= tol});
}

}  // namespace detail

/// Finite-difference checks for every differentiable building block, in
/// both precisions.
inline std::vector<CheckResult> gradient_suite() {
  std::vector<CheckResult> out;
  detail::fa_block_checks<float>(out);
  detail::fa_block_checks<double>(out);
  detail::mixup_checks<float>(out);
  detail::mixup_checks<double>(out);
  detail::deform_checks<float>(out);
  detail::deform_checks<double>(out);
  detail::loss_checks<float>(out);
  detail::loss_checks<double>(out);
  detail::network_checks<float>(out);
  detail::network_checks<double>(out);
  return out;
}

/// Closed-form properties of the contrastive term with the identity and
/// random extractors.
inline std::vector<CheckResult> cr_properties() {
  std::vector<CheckResult> out;
  const auto id = contrast::FeatureExtractor<double>::identity();
  contrast::LossConfig one;
  one.omega = {1.0};
  one.taps = {0};

  {
    const auto g = contrast::make_random_extractor<double>(3);
    contrast::LossConfig cfg;
    const auto clear = random_tensor<double>({1, 3, 16, 16}, 51, 0, 1);
    const auto hazy = random_tensor<double>({1, 3, 16, 16}, 52, 0, 1);
    const double v = contrast::cr_term(contrast::ContrastSample<double>{clear, {clear}, {hazy}}, g, cfg).value;
    out.push_back({"cr zero at perfect restoration", std::abs(v), 0, v == 0.0});
  }

  const Tensor<double> clear({1, 3, 4, 4}, 0.2);
  const Tensor<double> hazy({1, 3, 4, 4}, 0.8);
  for (double lambda : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    Tensor<double> anchor(clear.shape());
    for (std::size_t i = 0; i < anchor.size(); ++i) anchor[i] = (1 - lambda) * clear[i] + lambda * hazy[i];
    const double v = contrast::cr_term(contrast::ContrastSample<double>{anchor, {clear}, {hazy}}, id, one).value;
    const double err = std::abs(v - lambda / (1 - lambda));
    out.push_back({"cr segment lambda=" + std::to_string(lambda), err, 1e-6, err <= 1e-6});
  }

  {
    const auto g = contrast::make_random_extractor<float>(4);
    contrast::LossConfig cfg;
    bool same = true;
    for (int k = 0; k < 5; ++k) {
      const auto a = random_tensor<float>({1, 3, 16, 16}, 60 + k, 0, 1);
      const auto p = random_tensor<float>({1, 3, 16, 16}, 70 + k, 0, 1);
      const auto n = random_tensor<float>({1, 3, 16, 16}, 80 + k, 0, 1);
      const float multi = contrast::cr_term(contrast::ContrastSample<float>{a, {p}, {n}}, g, cfg).value;
      const float single = contrast::cr_term_single(a, p, n, g, cfg);
      same = same && multi == single;
    }
    out.push_back({"cr 1:1 bit-matches single pair", same ? 0.0 : 1.0, 0, same});
  }

  {
    contrast::LossConfig cfg = one;
    cfg.beta = 0.1;
    const Tensor<double> i({1, 3, 1, 1}, 0.8), j({1, 3, 1, 1}, 0.2), r({1, 3, 1, 1}, 0.4);
    const double total = contrast::total_loss(r, j, {i}, id, cfg).total;
    const double err = std::abs(total - 0.25);
    out.push_back({"hand-evaluated total loss 0.25", err, 1e-7, err <= 1e-7});
  }
  return out;
}

/// Metric closed forms (the golden-file regression lives with the tests
/// because it needs the fixture path).
inline std::vector<CheckResult> metric_closed_forms() {
  std::vector<CheckResult> out;
  const auto a = random_tensor<double>({1, 3, 32, 32}, 91, 0.1, 0.9);
  Tensor<double> b = a;
  for (auto& v : b.vec()) v += 1.0 / 255.0;
  const double p = eval::psnr(a, b);
  out.push_back({"psnr uniform 1/255", std::abs(p - 48.1308), 1e-3, std::abs(p - 48.1308) <= 1e-3});
  const double s = eval::ssim(a, a);
  out.push_back({"ssim self-similarity", std::abs(s - 1.0), 1e-6, std::abs(s - 1.0) <= 1e-6});

  const double delta = 0.1;
  const Tensor<double> c1({1, 3, 16, 16}, 0.5), c2({1, 3, 16, 16}, 0.5 + delta);
  const double k1 = 0.01 * 0.01, k2 = 0.03 * 0.03;
  const double mu1 = 0.5, mu2 = 0.5 + delta;
  const double expect = (2 * mu1 * mu2 + k1) * k2 / ((mu1 * mu1 + mu2 * mu2 + k1) * k2);
  const double got = eval::ssim(c1, c2);
  out.push_back({"ssim constant closed form", std::abs(got - expect), 1e-6, std::abs(got - expect) <= 1e-6});
  return out;
}

}  // namespace aecr::test
