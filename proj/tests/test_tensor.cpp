#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "stethofed/error.hpp"
#include "stethofed/rng.hpp"
#include "stethofed/tensor.hpp"

namespace stethofed {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorKind::Config;
}

std::shared_ptr<const Registry> two_block_registry() {
  auto r = std::make_shared<Registry>();
  r->add("a", {2, 3});
  r->add("b", {4});
  return r;
}

TEST(SpecGrid, LayoutIsFrequencyMajor) {
  SpecGrid g(2, 3, 0.0);
  g.row(1)[2] = 7.0;
  EXPECT_EQ(g.values()[5], 7.0);
  EXPECT_EQ(g.freq_bins(), 2u);
  EXPECT_EQ(g.time_frames(), 3u);
}

TEST(SpecGrid, ZeroDimensionIsRejected) {
  EXPECT_EQ(kind_of([] { SpecGrid(0, 3, 0.0); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([] { SpecGrid(2, 2, std::vector<double>(3)); }), ErrorKind::ShapeMismatch);
}

TEST(SpecGrid, FrobeniusNormMatchesNaiveSum) {
  RngStream s(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(7 * 9);
    double sq = 0.0;
    for (auto& x : v) {
      x = uniform(s, -100.0, 100.0);
      sq += x * x;
    }
    const SpecGrid g(7, 9, v);
    EXPECT_NEAR(frobenius_norm(g), std::sqrt(sq), 1e-12 * std::sqrt(sq));
  }
}

TEST(SpecGrid, FrobeniusNormSurvivesHugeEntries) {
  const double big = std::numeric_limits<double>::max() / 4.0;
  const SpecGrid g(1, 4, std::vector<double>{big, big, big, big});
  EXPECT_TRUE(std::isfinite(frobenius_norm(g)));
  EXPECT_NEAR(frobenius_norm(g) / big, 2.0, 1e-12);
}

TEST(SpecGrid, FrobeniusNormOfZeroIsZero) {
  EXPECT_EQ(frobenius_norm(SpecGrid(3, 3, 0.0)), 0.0);
}

TEST(Registry, OffsetsAreCumulative) {
  const auto r = two_block_registry();
  EXPECT_EQ(r->at("a").offset, 0u);
  EXPECT_EQ(r->at("b").offset, 6u);
  EXPECT_EQ(r->total(), 10u);
}

TEST(ParamVector, BlocksAliasTheFlatStorage) {
  ParamVector p(two_block_registry(), 0.0);
  p.block("b")[1] = 3.0;
  EXPECT_EQ(p[7], 3.0);
}

TEST(ParamVector, ArithmeticFollowsDefinitions) {
  const auto r = two_block_registry();
  ParamVector x(r, 0.0), y(r, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(i);
    y[i] = 1.0;
  }
  const auto z = axpy(2.0, x, y);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], 2.0 * i + 1.0);
  EXPECT_EQ(dot(x, y), 45.0);
  EXPECT_NEAR(l2_norm(y), std::sqrt(10.0), 1e-15);
  const auto d = x - y;
  EXPECT_EQ(d[0], -1.0);
  EXPECT_EQ((0.5 * x)[4], 2.0);
}

TEST(ParamVector, IncompatibleRegistriesAreRejected) {
  auto other = std::make_shared<Registry>();
  other->add("a", {10});
  const ParamVector x(two_block_registry(), 1.0);
  const ParamVector y(other, 1.0);
  EXPECT_EQ(kind_of([&] { (void)dot(x, y); }), ErrorKind::IncompatibleRegistry);
}

TEST(ParamVector, EqualityIsBitwise) {
  const auto r = two_block_registry();
  ParamVector a(r, 0.0), b(r, -0.0);
  EXPECT_FALSE(a == b);
  b = a;
  EXPECT_TRUE(a == b);
}

}  // namespace
}  // namespace stethofed
