#include <gtest/gtest.h>

#include <cmath>

#include "stethofed/error.hpp"
#include "stethofed/model.hpp"
#include "test_support.hpp"

namespace stethofed {
namespace {

using testing::random_grid;
using testing::random_prompt;
using testing::random_target;
using testing::small_spec;

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ParamVector central_difference(const ModelSpec& spec, const ParamVector& theta,
                               std::span<const SampleView> batch, double step) {
  ParamVector g(theta.registry_ptr(), 0.0);
  ParamVector probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + step;
    const double up = loss_and_grad(spec, probe, batch).loss;
    probe.values()[i] = orig - step;
    const double down = loss_and_grad(spec, probe, batch).loss;
    probe.values()[i] = orig;
    g.values()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

TEST(Model, RegistryCoversEveryBlockContiguously) {
  const auto spec = small_spec();
  const auto reg = make_registry(spec);
  std::size_t expected = 0;
  for (const auto& e : reg->entries()) {
    EXPECT_EQ(e.offset, expected) << e.name;
    expected += e.volume();
  }
  EXPECT_EQ(reg->total(), expected);
  EXPECT_EQ(reg->at("audio1.weight").shape, (std::vector<std::size_t>{6, 16}));
  EXPECT_EQ(reg->at("fusion.weight").shape, (std::vector<std::size_t>{4, 11}));
}

TEST(Model, PoolGridAveragesPatches) {
  auto spec = small_spec();
  std::vector<double> v(8 * 12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const SpecGrid x(8, 12, v);
  const auto pooled = pool_grid(spec, x);
  ASSERT_EQ(pooled.size(), 16u);
  // Top-left patch: rows 0-1, columns 0-2.
  EXPECT_DOUBLE_EQ(pooled[0], (0 + 1 + 2 + 12 + 13 + 14) / 6.0);
}

TEST(Model, AnalyticGradientMatchesCentralDifferences) {
  RngStream root(11);
  const auto spec = small_spec();
  for (int trial = 0; trial < 20; ++trial) {
    auto s = root.child(static_cast<std::uint64_t>(trial));
    auto init = s.child("init");
    const auto m = init_model(spec, init);
    auto data = s.child("data");
    std::vector<SpecGrid> grids;
    for (int i = 0; i < 3; ++i) grids.push_back(random_grid(data, 8, 12));
    std::vector<SampleView> batch;
    for (const auto& g : grids) {
      batch.push_back({&g, random_prompt(data, spec.vocab), random_target(data)});
    }
    const auto analytic = loss_and_grad(m, batch).grad;
    const auto numeric = central_difference(spec, m.params, batch, 1e-5);
    EXPECT_LT(max_abs_diff(analytic.values(), numeric.values()), 1e-6) << "trial " << trial;
  }
}

TEST(Model, LossIsCrossEntropyOfSoftmax) {
  RngStream s(3);
  const auto spec = small_spec();
  auto init = s.child("init");
  const auto m = init_model(spec, init);
  const auto g = random_grid(s, 8, 12);
  const auto prompt = random_prompt(s, spec.vocab);
  const auto target = random_target(s);
  const std::array<SampleView, 1> one{SampleView{&g, prompt, target}};
  const auto p = softmax(forward(m, g, prompt));
  double ce = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) ce -= target[k] * std::log(p[k]);
  EXPECT_NEAR(loss_and_grad(m, one).loss, ce, 1e-12);
}

TEST(Model, EmptyBatchIsRejected) {
  const auto m = zero_model(small_spec());
  EXPECT_THROW(
      {
        try {
          loss_and_grad(m, std::span<const SampleView>{});
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::EmptyBatch);
          throw;
        }
      },
      Error);
}

TEST(Model, FiniteDifferenceHvpIsExactOnQuadratics) {
  // f(theta) = 0.5 theta^T A theta + b^T theta has gradient A theta + b and
  // Hessian A; central differences of an affine gradient are exact up to
  // rounding.
  RngStream root(5);
  auto reg = std::make_shared<Registry>();
  reg->add("w", {9});
  const std::shared_ptr<const Registry> creg = reg;
  for (int trial = 0; trial < 10; ++trial) {
    auto s = root.child(static_cast<std::uint64_t>(trial));
    std::vector<double> a(81), b(9);
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j <= i; ++j) a[i * 9 + j] = a[j * 9 + i] = uniform(s, -2.0, 2.0);
      b[i] = uniform(s, -1.0, 1.0);
    }
    const GradientFn grad = [&](const ParamVector& th) {
      ParamVector g(creg, 0.0);
      for (std::size_t i = 0; i < 9; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < 9; ++j) acc += a[i * 9 + j] * th.values()[j];
        g.values()[i] = acc;
      }
      return g;
    };
    ParamVector theta(creg, 0.0), v(creg, 0.0);
    for (std::size_t i = 0; i < 9; ++i) {
      theta.values()[i] = uniform(s, -3.0, 3.0);
      v.values()[i] = uniform(s, -1.0, 1.0);
    }
    const auto hv = finite_difference_hvp(grad, theta, v, 1e-4);
    std::vector<double> exact(9, 0.0);
    double norm = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j < 9; ++j) exact[i] += a[i * 9 + j] * v.values()[j];
      norm = std::max(norm, std::abs(exact[i]));
    }
    EXPECT_LT(max_abs_diff(hv.values(), exact) / norm, 1e-6);
  }
}

TEST(Model, HvpOfZeroDirectionIsZero) {
  RngStream s(8);
  const auto spec = small_spec();
  auto init = s.child("init");
  const auto m = init_model(spec, init);
  const auto g = random_grid(s, 8, 12);
  const SampleView view{&g, random_prompt(s, spec.vocab), random_target(s)};
  const ParamVector zero(m.params.registry_ptr(), 0.0);
  const auto hv = hvp(m, view, zero);
  for (double x : hv.values()) EXPECT_EQ(x, 0.0);
}

TEST(Model, HvpIsSymmetricBilinearForm) {
  // u^T H v == v^T H u for the model Hessian.
  RngStream s(9);
  const auto spec = small_spec();
  auto init = s.child("init");
  const auto m = init_model(spec, init);
  const auto g = random_grid(s, 8, 12);
  const SampleView view{&g, random_prompt(s, spec.vocab), random_target(s)};
  ParamVector u(m.params.registry_ptr(), 0.0), v(m.params.registry_ptr(), 0.0);
  for (auto& x : u.values()) x = uniform(s, -1.0, 1.0);
  for (auto& x : v.values()) x = uniform(s, -1.0, 1.0);
  const double uhv = dot(u, hvp(m, view, v));
  const double vhu = dot(v, hvp(m, view, u));
  EXPECT_NEAR(uhv, vhu, 1e-5 * (std::abs(uhv) + 1.0));
}

TEST(Model, EmbedAudioHasHiddenWidth) {
  RngStream s(2);
  const auto spec = small_spec();
  auto init = s.child("init");
  const auto m = init_model(spec, init);
  const auto g = random_grid(s, 8, 12);
  EXPECT_EQ(embed_audio(m, g).size(), spec.hidden);
}

}  // namespace
}  // namespace stethofed
