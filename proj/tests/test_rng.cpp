#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "stethofed/error.hpp"
#include "stethofed/rng.hpp"

namespace stethofed {
namespace {

TEST(Rng, SamePathGivesSameSequence) {
  auto a = RngStream(42).child("x").child(3);
  auto b = RngStream(42).child("x").child(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SiblingsAndSeedsDiffer) {
  auto a = RngStream(42).child("x");
  auto b = RngStream(42).child("y");
  auto c = RngStream(43).child("x");
  auto d = RngStream(42).child(std::uint64_t{0});
  const auto va = a.next_u64();
  EXPECT_NE(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(va, d.next_u64());
}

TEST(Rng, ChildDoesNotDependOnParentProgress) {
  auto p = RngStream(1);
  const auto before = p.child("k").next_u64();
  p.next_u64();
  p.next_u64();
  EXPECT_EQ(p.child("k").next_u64(), before);
}

TEST(Rng, UnitDrawsLieInHalfOpenInterval) {
  RngStream s(9);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_unit();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, UniformRespectsBoundsAndRejectsEmptyRange) {
  RngStream s(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = uniform(s, 0.8, 1.2);
    EXPECT_GE(x, 0.8);
    EXPECT_LT(x, 1.2);
  }
  EXPECT_THROW(uniform(s, 1.0, 1.0), Error);
}

TEST(Rng, BelowIsUnbiased) {
  RngStream s(3);
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[s.below(6)];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 6.0, 0.01);
}

TEST(Rng, NormalHasUnitMoments) {
  RngStream s(5);
  const int n = 100000;
  double m = 0.0, v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m += z;
    v += z * z;
  }
  m /= n;
  v = v / n - m * m;
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(Rng, BetaMatchesMean) {
  RngStream s(6);
  const int n = 50000;
  for (auto [a, b] : {std::pair{0.2, 0.2}, std::pair{2.0, 5.0}}) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = beta(s, a, b);
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
      sum += x;
    }
    EXPECT_NEAR(sum / n, a / (a + b), 0.01);
  }
}

TEST(Rng, PermutationIsABijection) {
  RngStream s(7);
  auto p = permutation(s, 257);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> ident(257);
  std::iota(ident.begin(), ident.end(), 0);
  EXPECT_EQ(sorted, ident);
  EXPECT_NE(p, ident);
}

TEST(Rng, DrawCounterAdvances) {
  RngStream s(8);
  s.next_u64();
  s.next_unit();
  EXPECT_EQ(s.draws(), 2u);
}

}  // namespace
}  // namespace stethofed
