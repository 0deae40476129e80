#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "stethofed/augment.hpp"
#include "stethofed/error.hpp"
#include "test_support.hpp"

namespace stethofed {
namespace {

using testing::random_grid;

double naive_norm(const SpecGrid& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

// Zero-padded, same-size cross-correlation followed by bias and an optional
// leaky rectification, written out index by index.
SpecGrid direct_block(const SpecGrid& x, const GinBlock& b, bool rectify, double slope) {
  const auto F = x.freq_bins(), T = x.time_frames();
  const auto kf = b.shape.freq, kt = b.shape.time;
  SpecGrid out(F, T, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < T; ++t) {
      double acc = b.bias;
      for (std::size_t i = 0; i < kf; ++i) {
        for (std::size_t j = 0; j < kt; ++j) {
          const auto ff = static_cast<long>(f + i) - static_cast<long>(kf / 2);
          const auto tt = static_cast<long>(t + j) - static_cast<long>(kt / 2);
          if (ff < 0 || tt < 0 || ff >= static_cast<long>(F) || tt >= static_cast<long>(T)) continue;
          acc += b.weights[i * kt + j] * x.row(static_cast<std::size_t>(ff))[static_cast<std::size_t>(tt)];
        }
      }
      out.row(f)[t] = rectify && acc < 0.0 ? slope * acc : acc;
    }
  }
  return out;
}

GinKernels single_block(KernelShape shape, std::vector<double> w, double bias) {
  return GinKernels{{GinBlock{shape, std::move(w), bias}}};
}

TEST(Gain, UnitGainIsIdentity) {
  RngStream s(1);
  GinConfig cfg;
  cfg.g_min = cfg.g_max = 1.0;
  const auto x = random_grid(s, 5, 6);
  const auto [y, g] = gain_intervene(x, s, cfg);
  EXPECT_EQ(g, 1.0);
  EXPECT_EQ(y, x);
}

TEST(Gain, FixedGainScalesNorm) {
  GinConfig cfg;
  cfg.g_min = cfg.g_max = 0.8;
  RngStream s(2);
  // 10 entries of magnitude sqrt(10) -> norm 10.
  const SpecGrid x(2, 5, std::sqrt(10.0));
  EXPECT_NEAR(frobenius_norm(gain_intervene(x, s, cfg).first), 8.0, 1e-12);
}

TEST(Gain, DefaultDrawsStayInRange) {
  RngStream s(3);
  const SpecGrid x(3, 3, 1.0);
  GinConfig cfg;
  for (int i = 0; i < 10000; ++i) {
    const double g = gain_intervene(x, s, cfg).second;
    ASSERT_GE(g, 0.8);
    ASSERT_LT(g, 1.2);
  }
}

TEST(Kernels, CountAndDeterminism) {
  GinConfig cfg;
  cfg.num_blocks = 1;
  auto a = RngStream(4).child("k");
  auto b = RngStream(4).child("k");
  const auto ka = sample_kernels(a, cfg);
  EXPECT_EQ(ka.blocks.size(), 1u);
  EXPECT_EQ(ka, sample_kernels(b, cfg));
}

TEST(Kernels, ShapesAreUniformAndWeightsBounded) {
  GinConfig cfg;
  cfg.num_blocks = 1;
  RngStream root(5);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto s = root.child(static_cast<std::uint64_t>(i));
    const auto k = sample_kernels(s, cfg);
    const auto& b = k.blocks[0];
    ++counts[{b.shape.freq, b.shape.time}];
    const double bound = std::sqrt(3.0 / static_cast<double>(b.shape.volume()));
    ASSERT_EQ(b.weights.size(), b.shape.volume());
    for (double w : b.weights) ASSERT_LE(std::abs(w), bound);
    ASSERT_LE(std::abs(b.bias), 0.1);
  }
  ASSERT_EQ(counts.size(), 3u);
  for (const auto& [shape, c] : counts) {
    EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 3.0, 0.02);
  }
}

TEST(Style, IdentityAndAffineKernels) {
  RngStream s(6);
  GinConfig cfg;
  const auto x = random_grid(s, 4, 5);
  EXPECT_EQ(apply_style(x, single_block({1, 1}, {1.0}, 0.0), cfg), x);
  const auto y = apply_style(x, single_block({1, 1}, {2.0}, 1.0), cfg);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.values()[i], 2.0 * x.values()[i] + 1.0);
}

TEST(Style, CenteredTapKeepsInteriorAndZeroPadsBoundary) {
  RngStream s(7);
  GinConfig cfg;
  const auto x = random_grid(s, 4, 6);
  const auto k = single_block({1, 3}, {0.0, 1.0, 0.0}, 0.0);
  const auto y = apply_style(x, k, cfg);
  EXPECT_EQ(y, direct_block(x, k.blocks[0], false, cfg.leak_slope));
  EXPECT_EQ(y, x);
  const auto shift = single_block({1, 3}, {1.0, 0.0, 0.0}, 0.0);
  const auto z = apply_style(x, shift, cfg);
  for (std::size_t f = 0; f < 4; ++f) {
    EXPECT_EQ(z.row(f)[0], 0.0);
    for (std::size_t t = 1; t < 6; ++t) EXPECT_EQ(z.row(f)[t], x.row(f)[t - 1]);
  }
}

TEST(Style, RandomStacksMatchDirectConvolution) {
  RngStream root(8);
  GinConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    auto s = root.child(static_cast<std::uint64_t>(trial));
    const auto x = random_grid(s, 6, 7, -5.0, 5.0);
    const auto kernels = sample_kernels(s, cfg);
    SpecGrid expect = x;
    for (std::size_t b = 0; b < kernels.blocks.size(); ++b) {
      expect = direct_block(expect, kernels.blocks[b], b + 1 < kernels.blocks.size(), cfg.leak_slope);
    }
    const auto got = apply_style(x, kernels, cfg);
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_NEAR(got.values()[i], expect.values()[i], 1e-12);
    }
  }
}

TEST(Style, TinyGridIsRejected) {
  GinConfig cfg;
  try {
    apply_style(SpecGrid(2, 8, 0.0), single_block({1, 1}, {1.0}, 0.0), cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooSmall);
  }
}

TEST(Alpha, ClipExamples) {
  const std::vector<double> gates{0.0, 0.7, 1.3};
  EXPECT_EQ(clip_alpha(gates, 0.25), (std::vector<double>{0.25, 0.7, 1.0}));
}

TEST(Alpha, SampledMaskIsBounded) {
  RngStream s(9);
  GinConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    for (double a : sample_alpha(s, cfg, 64)) {
      ASSERT_GE(a, 0.25);
      ASSERT_LE(a, 1.0);
    }
  }
}

TEST(Interpolate, ArithmeticAndContentFloor) {
  const SpecGrid gain(1, 3, 4.0);
  const SpecGrid style(1, 3, 0.0);
  const std::vector<double> alpha{0.25};
  // Pre-normalization entries are 1.0; renormalization restores norm of gain.
  const auto out = interpolate_and_renormalize(gain, style, alpha, 1e-8);
  const double pre_norm = std::sqrt(3.0);
  const double factor = frobenius_norm(gain) / (pre_norm + 1e-8);
  for (double v : out.values()) EXPECT_NEAR(v, 1.0 * factor, 1e-12);
}

TEST(Interpolate, AlphaOneReturnsGainUpToEpsilon) {
  RngStream s(10);
  GinConfig cfg;
  cfg.alpha_min = 1.0;
  const auto kernels = sample_kernels(s, cfg);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_grid(s, 8, 9, -3.0, 3.0);
    cfg.g_min = cfg.g_max = 1.0;
    const auto y = gin_augment(x, s, kernels, cfg);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(y.values()[k], x.values()[k], 1e-6);
  }
}

TEST(Interpolate, NormIsPreservedAndFinite) {
  RngStream s(11);
  GinConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const auto kernels = sample_kernels(s, cfg);
    const auto x = random_grid(s, 8, 16, -90.0, -40.0);
    auto gs = s.child("gain");
    const double g_norm = naive_norm(gain_intervene(x, gs, cfg).first);
    auto ss = s;
    const auto y = gin_augment(x, ss, kernels, cfg);
    ASSERT_TRUE(y.all_finite());
    const double ratio = naive_norm(y) / g_norm;
    EXPECT_LE(ratio, 1.0 + 1e-12);
    EXPECT_GE(ratio, 1.0 - 1e-6);
  }
}

TEST(Interpolate, ZeroInputStaysFinite) {
  RngStream s(12);
  GinConfig cfg;
  const auto kernels = sample_kernels(s, cfg);
  const auto y = gin_augment(SpecGrid(4, 4, 0.0), s, kernels, cfg);
  EXPECT_TRUE(y.all_finite());
}

TEST(SpecMask, NoOpWhenWidthsAreZero) {
  RngStream s(13);
  const auto x = random_grid(s, 6, 8);
  EXPECT_EQ(spec_mask(x, s, 0, 0), x);
}

TEST(SpecMask, OnlyBandEntriesAreZeroed) {
  RngStream s(14);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_grid(s, 10, 12, 1.0, 2.0);
    const auto bands = sample_mask_bands(s, 10, 12, 4, 5);
    ASSERT_LE(bands.freq_width, 4u);
    ASSERT_LE(bands.time_width, 5u);
    const auto y = apply_mask_bands(x, bands);
    for (std::size_t f = 0; f < 10; ++f) {
      for (std::size_t t = 0; t < 12; ++t) {
        const bool in_f = f >= bands.freq_start && f < bands.freq_start + bands.freq_width;
        const bool in_t = t >= bands.time_start && t < bands.time_start + bands.time_width;
        if (in_f || in_t) {
          ASSERT_EQ(y.row(f)[t], 0.0);
        } else {
          ASSERT_EQ(y.row(f)[t], x.row(f)[t]);
        }
      }
    }
  }
}

TEST(SpecMask, FullWidthBandZeroesDrawnRows) {
  const SpecGrid x(5, 4, 1.0);
  const MaskBands bands{1, 3, 0, 0};
  const auto y = apply_mask_bands(x, bands);
  std::size_t zero_rows = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto row = y.row(f);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) ++zero_rows;
  }
  EXPECT_EQ(zero_rows, 3u);
}

TEST(SpecMask, OversizedWidthIsRejected) {
  RngStream s(15);
  try {
    spec_mask(SpecGrid(4, 4, 1.0), s, 5, 0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadRange);
  }
}

TEST(Mixup, EndpointsArithmeticAndConvexity) {
  RngStream s(16);
  const auto x2 = random_grid(s, 3, 4);
  const auto x1 = scaled(x2, 2.0);
  const LabelDist y1 = one_hot(RespClass::Crackle);
  const LabelDist y2 = one_hot(RespClass::Normal);
  const auto at_one = mixup(x1, x2, y1, y2, 1.0);
  EXPECT_EQ(at_one.grid, x1);
  EXPECT_EQ(at_one.target, y1);
  const auto half = mixup(x1, x2, y1, y2, 0.5);
  for (std::size_t i = 0; i < x2.size(); ++i) {
    EXPECT_NEAR(half.grid.values()[i], 1.5 * x2.values()[i], 1e-15);
  }
  double total = 0.0;
  for (double p : half.target) total += p;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_THROW(mixup(x1, SpecGrid(4, 3, 0.0), y1, y2, 0.5), Error);
}

}  // namespace
}  // namespace stethofed
