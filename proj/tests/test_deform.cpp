#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "aecr/deform/deform_conv.hpp"
#include "checks.hpp"

using namespace aecr;
using deform::bilinear_sample;

TEST(Bilinear, LatticePointReturnsStoredValue) {
  const auto p = test::random_tensor<double>({1, 1, 5, 6}, 1);
  EXPECT_EQ(bilinear_sample(p.data(), 5, 6, 2.0, 3.0), p.at(0, 0, 2, 3));
}

TEST(Bilinear, ExactOnLinearRamp) {
  Tensor<double> p(1, 1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) p.at(0, 0, y, x) = x;
  EXPECT_DOUBLE_EQ(bilinear_sample(p.data(), 4, 4, 1.0, 1.5), 1.5);
  EXPECT_DOUBLE_EQ(bilinear_sample(p.data(), 4, 4, 2.25, 0.75), 0.75);
}

TEST(Bilinear, PhantomNeighboursAreZero) {
  const Tensor<double> p(1, 1, 3, 3, 0.8);
  EXPECT_DOUBLE_EQ(bilinear_sample(p.data(), 3, 3, -0.5, 1.0), 0.4);
  EXPECT_DOUBLE_EQ(bilinear_sample(p.data(), 3, 3, 1.0, 2.5), 0.4);
  EXPECT_DOUBLE_EQ(bilinear_sample(p.data(), 3, 3, -40.0, 1e9), 0.0);
}

TEST(Bilinear, NonFiniteCoordinateIsInputError) {
  const Tensor<float> p(1, 1, 3, 3, 1.0f);
  EXPECT_THROW(bilinear_sample(p.data(), 3, 3, std::numeric_limits<float>::quiet_NaN(), 0.0f), InputError);
  EXPECT_THROW(bilinear_sample(p.data(), 3, 3, 0.0f, std::numeric_limits<float>::infinity()), InputError);
}

TEST(DeformConv, ZeroOffsetsEqualDirectConvolution) {
  EXPECT_LE(test::zero_offset_max_diff(100), 1e-5);
}

TEST(DeformConv, ZeroOffsetsMatchRegularConvBitwise) {
  deform::DeformConv2d<float> dcn(5, 6);
  nn::Rng rng(3);
  dcn.init(rng);
  nn::Conv2d<float> conv(5, 6, 3);
  conv.weight.value = dcn.weight.value;
  conv.bias.value = dcn.bias.value;
  const auto x = test::random_tensor<float>({1, 5, 12, 10}, 4);
  const auto a = dcn.forward(x);
  const auto b = conv.forward(x);
  for (int c = 0; c < 6; ++c)
    for (int y = 1; y < 11; ++y)
      for (int xx = 1; xx < 9; ++xx) EXPECT_EQ(a.at(0, c, y, xx), b.at(0, c, y, xx));
}

TEST(DeformConv, HalfPixelOffsetSamplesHorizontalMidpoint) {
  deform::DeformConv2d<double> dcn(1, 1);
  nn::Rng rng(1);
  dcn.init(rng);
  dcn.weight.value.zero();
  dcn.weight.value[4] = 1.0;  // centre tap only
  for (int k = 0; k < 9; ++k) {
    dcn.offset.bias.value[2 * k] = 0.0;
    dcn.offset.bias.value[2 * k + 1] = 0.5;
  }
  Tensor<double> x(1, 1, 3, 3);
  x.vec() = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto y = dcn.forward(x);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double right = c + 1 < 3 ? x.at(0, 0, r, c + 1) : 0.0;
      EXPECT_DOUBLE_EQ(y.at(0, 0, r, c), 0.5 * (x.at(0, 0, r, c) + right));
    }
  }
}

TEST(DeformConv, FiniteForFarOffsets) {
  deform::DeformConv2d<float> dcn(2, 2);
  nn::Rng rng(5);
  dcn.init(rng, 1e6f);
  const auto y = dcn.forward(test::random_tensor<float>({1, 2, 6, 6}, 6));
  for (float v : y.vec()) EXPECT_TRUE(std::isfinite(v));
}

TEST(DeformConv, ChannelMismatchIsConfigError) {
  deform::DeformConv2d<float> dcn(4, 4);
  EXPECT_THROW(dcn.forward(Tensor<float>(1, 3, 4, 4)), ConfigError);
}

TEST(Dfe, ShapeAndZeroOffsetComposition) {
  deform::Dfe<float> dfe(128);
  nn::Rng rng(7);
  dfe.init(rng);
  const auto x = test::random_tensor<float>({1, 128, 16, 16}, 8);
  const auto y = dfe.forward(x);
  EXPECT_EQ(y.shape(), x.shape());
  const auto ref = test::direct_conv(nn::relu(test::direct_conv(x, dfe.dcn1.weight, dfe.dcn1.bias)),
                                        dfe.dcn2.weight, dfe.dcn2.bias);
  double worst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, double(std::abs(y[i] - ref[i])));
  EXPECT_LE(worst, 1e-4);
}

TEST(DeformConv, GradientsMatchFiniteDifferences) {
  std::vector<test::CheckResult> out;
  test::detail::deform_checks<float>(out);
  test::detail::deform_checks<double>(out);
  for (const auto& r : out) EXPECT_TRUE(r.ok) << r.name << " " << r.value;
}
