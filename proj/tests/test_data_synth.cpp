#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "stethofed/data_synth.hpp"
#include "stethofed/error.hpp"

namespace stethofed {
namespace {

constexpr std::size_t kF = 32;
constexpr std::size_t kT = 48;

// Longest run of consecutive frames at or above level, over all rows.
std::size_t longest_sustained_run(const SpecGrid& g, double level) {
  std::size_t best = 0;
  for (std::size_t f = 0; f < g.freq_bins(); ++f) {
    std::size_t run = 0;
    for (double v : g.row(f)) {
      run = v >= level ? run + 1 : 0;
      best = std::max(best, run);
    }
  }
  return best;
}

// Entries covered by any transient or ridge of the event.
std::vector<bool> event_mask(const ContentEvent& e, std::size_t F, std::size_t T) {
  std::vector<bool> m(F * T, false);
  for (const auto& c : e.crackles) {
    for (std::size_t f = c.freq_lo; f < std::min(c.freq_hi, F); ++f) {
      for (std::size_t t = c.onset; t < std::min(c.onset + c.width, T); ++t) m[f * T + t] = true;
    }
  }
  for (const auto& r : e.wheezes) {
    for (std::size_t f = r.freq_lo; f < std::min(r.freq_lo + r.width, F); ++f) {
      for (std::size_t t = r.onset; t < std::min(r.onset + r.duration, T); ++t) m[f * T + t] = true;
    }
  }
  return m;
}

TEST(Presets, MatchDeviceTable) {
  const auto presets = table1_presets();
  ASSERT_EQ(presets.size(), 5u);
  EXPECT_DOUBLE_EQ(find_preset(presets, "AKGC417L").mean_offset, -51.31);
  EXPECT_DOUBLE_EQ(find_preset(presets, "LittC2SE").mean_offset, -90.53);
  EXPECT_DOUBLE_EQ(find_preset(presets, "Litt3200").mean_offset, -77.62);
  EXPECT_DOUBLE_EQ(find_preset(presets, "Meditron").mean_offset, -77.34);
  EXPECT_DOUBLE_EQ(find_preset(presets, "Yunting").mean_offset, -82.73);
  const auto& y = find_preset(presets, "Yunting").class_ratio;
  EXPECT_NEAR(y[0], 6199.0 / 8031.0, 1e-12);
  EXPECT_THROW(find_preset(presets, "Nope"), Error);
}

TEST(Styles, ResponseVariationFollowsFrequencyScaleOrdering) {
  std::map<std::string, double> spread;
  for (const auto& p : table1_presets()) {
    const auto s = make_style(p, 64);
    double m = 0.0, v = 0.0;
    for (double r : s.freq_response) m += std::log(r);
    m /= 64.0;
    for (double r : s.freq_response) v += (std::log(r) - m) * (std::log(r) - m);
    spread[p.device_id] = v;
  }
  EXPECT_GT(spread["AKGC417L"], spread["Meditron"]);
  EXPECT_GT(spread["Meditron"], spread["LittC2SE"]);
  EXPECT_GT(spread["LittC2SE"], spread["Litt3200"]);
  EXPECT_GT(spread["LittC2SE"], spread["Yunting"]);
}

TEST(Content, NormalStaysWithinBedBound) {
  RngStream root(1);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto s = root.child(i);
    const auto e = sample_event(RespClass::Normal, s, kF, kT);
    EXPECT_TRUE(e.crackles.empty() && e.wheezes.empty());
    const auto g = render_content(e, s, kF, kT);
    for (std::size_t f = 0; f < kF; ++f) {
      for (double v : g.row(f)) ASSERT_LE(v, 3.0 * bed_sd(f));
    }
  }
}

TEST(Content, WheezeHasSustainedRidge) {
  RngStream root(2);
  for (std::uint64_t i = 0; i < 100; ++i) {
    auto s = root.child(i);
    const auto e = sample_event(RespClass::Wheeze, s, kF, kT);
    ASSERT_FALSE(e.wheezes.empty());
    for (const auto& r : e.wheezes) {
      EXPECT_LE(r.width, 4u);
      EXPECT_GE(r.duration, kT / 3);
    }
    const auto g = render_content(e, s, kF, kT);
    EXPECT_GE(longest_sustained_run(g, 6.0), kT / 3) << "draw " << i;
  }
}

TEST(Content, CrackleTransientsAreShortAndBroadband) {
  RngStream root(3);
  for (std::uint64_t i = 0; i < 100; ++i) {
    auto s = root.child(i);
    const auto e = sample_event(RespClass::Crackle, s, kF, kT);
    ASSERT_GE(e.crackles.size(), 2u);
    ASSERT_LE(e.crackles.size(), 5u);
    EXPECT_TRUE(e.wheezes.empty());
    for (const auto& c : e.crackles) {
      EXPECT_LE(c.width, 3u);
      EXPECT_GE(c.freq_hi - c.freq_lo, kF / 2);
    }
    const auto g = render_content(e, s, kF, kT);
    // No crackle-only grid carries a sustained ridge.
    EXPECT_LT(longest_sustained_run(g, 6.0), kT / 3);
  }
}

TEST(Content, BothCarriesBothEventKinds) {
  RngStream s(4);
  const auto e = sample_event(RespClass::Both, s, kF, kT);
  EXPECT_FALSE(e.crackles.empty());
  EXPECT_FALSE(e.wheezes.empty());
}

TEST(Content, DeterministicPerStream) {
  auto a = RngStream(5).child("c");
  auto b = RngStream(5).child("c");
  const auto ea = sample_event(RespClass::Both, a, kF, kT);
  const auto eb = sample_event(RespClass::Both, b, kF, kT);
  EXPECT_EQ(render_content(ea, a, kF, kT), render_content(eb, b, kF, kT));
}

TEST(Content, TinyGridIsRejected) {
  RngStream s(6);
  try {
    render_content(ContentEvent{}, s, 4, 16);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooSmall);
  }
}

TEST(Device, IdentityStyleReturnsContent) {
  RngStream s(7);
  const auto e = sample_event(RespClass::Both, s, kF, kT);
  const auto c = render_content(e, s, kF, kT);
  DeviceStyle id;
  id.freq_response.assign(kF, 1.0);
  EXPECT_EQ(apply_device(c, id, s), c);
  id.freq_response.pop_back();
  EXPECT_THROW(apply_device(c, id, s), Error);
}

TEST(Device, OffsetsSeparateMeansByTableDifference) {
  const auto presets = table1_presets();
  RngStream s(8);
  const auto e = sample_event(RespClass::Normal, s, 64, 128);
  const auto c = render_content(e, s, 64, 128);
  auto mean = [](const SpecGrid& g) {
    double m = 0.0;
    for (double v : g.values()) m += v;
    return m / static_cast<double>(g.size());
  };
  const auto a = apply_device(c, make_style(find_preset(presets, "AKGC417L"), 64), s);
  const auto b = apply_device(c, make_style(find_preset(presets, "LittC2SE"), 64), s);
  // Content bed is zero mean with sd <= 2; the noise floor is at most 2.
  EXPECT_NEAR(mean(a) - mean(b), 39.22, 0.5);
}

TEST(Device, EventPositionsSurviveAnyStyle) {
  const auto presets = table1_presets();
  RngStream root(9);
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto s = root.child(i);
    const auto e = sample_event(RespClass::Both, s, kF, kT);
    const auto c = render_content(e, s, kF, kT);
    const auto oracle = event_mask(e, kF, kT);
    for (const auto& p : presets) {
      auto style = make_style(p, kF);
      style.noise_floor_sd = 0.0;
      const auto x = apply_device(c, style, s);
      // Undo the style and threshold between the bed bound (sqrt(3) * 2) and
      // the weakest event on the lowest bed (8 - sqrt(3) * 2).
      std::vector<bool> mask(kF * kT);
      for (std::size_t f = 0; f < kF; ++f) {
        for (std::size_t t = 0; t < kT; ++t) {
          const double v = (x.row(f)[t] - style.mean_offset) / style.freq_response[f];
          mask[f * kT + t] = v > 4.0;
        }
      }
      EXPECT_EQ(mask, oracle) << p.device_id;
    }
  }
}

TEST(Quota, ExactLargestRemainder) {
  EXPECT_EQ(class_quota({1.0, 0.0, 0.0, 0.0}, 7), (std::array<std::size_t, 4>{7, 0, 0, 0}));
  const auto q = class_quota({0.772, 0.130, 0.094, 0.004}, 10000);
  EXPECT_EQ(q[0] + q[1] + q[2] + q[3], 10000u);
  const std::array<double, 4> ratio{0.772, 0.130, 0.094, 0.004};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(q[k] / 10000.0, ratio[k], 0.01);
  const auto small = class_quota({1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}, 10);
  EXPECT_EQ(small[0] + small[1] + small[2], 10u);
  try {
    class_quota({0.5, 0.2, 0.2, 0.0}, 10);
    ADD_FAILURE();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::BadRatio);
  }
}

GenerationSpec small_spec(std::size_t per_device) {
  GenerationSpec spec;
  spec.freq_bins = kF;
  spec.time_frames = kT;
  for (const auto& p : table1_presets()) spec.devices.push_back({p, per_device});
  return spec;
}

TEST(Generate, CountsLabelsAndDemographics) {
  const auto ds = generate_dataset(small_spec(200));
  ASSERT_EQ(ds.records.size(), 1000u);
  std::map<std::string, std::array<std::size_t, 4>> counts;
  std::map<std::string, std::size_t> pediatric;
  const auto ped = ds.vocab.id("pediatric");
  for (const auto& r : ds.records) {
    ++counts[r.device][static_cast<std::size_t>(r.label)];
    pediatric[r.device] += r.prompt.get(Attribute::AgeGroup) == ped;
    EXPECT_EQ(ds.vocab.name(r.prompt.get(Attribute::Device)), r.device);
    EXPECT_TRUE(r.grid.all_finite());
  }
  for (const auto& p : table1_presets()) {
    const auto expect = class_quota(p.class_ratio, 200);
    std::array<std::size_t, 4> got = counts[p.device_id];
    EXPECT_EQ(got, expect) << p.device_id;
  }
  EXPECT_GT(pediatric["Yunting"], 170u);
  EXPECT_LT(pediatric["AKGC417L"], 40u);
}

TEST(Generate, DeviceMeansTrackOffsets) {
  const auto ds = generate_dataset(small_spec(100));
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : ds.records) {
    for (double v : r.grid.values()) {
      acc[r.device].first += v;
      ++acc[r.device].second;
    }
  }
  for (const auto& p : table1_presets()) {
    const double m = acc[p.device_id].first / static_cast<double>(acc[p.device_id].second);
    // Events add positive energy; the bed and noise are zero mean.
    EXPECT_GT(m, p.mean_offset - 0.1) << p.device_id;
    EXPECT_LT(m, p.mean_offset + 1.5) << p.device_id;
  }
}

TEST(Generate, DeviceStreamsAreIndependentOfOtherDevices) {
  auto one = small_spec(30);
  const auto all = generate_dataset(one);
  one.devices = {one.devices[3]};
  const auto solo = generate_dataset(one);
  std::vector<const Record*> from_all;
  for (const auto& r : all.records) {
    if (r.device == solo.records[0].device) from_all.push_back(&r);
  }
  ASSERT_EQ(from_all.size(), solo.records.size());
  for (std::size_t i = 0; i < solo.records.size(); ++i) {
    EXPECT_EQ(from_all[i]->grid, solo.records[i].grid);
    EXPECT_EQ(from_all[i]->label, solo.records[i].label);
  }
}

TEST(Generate, SiteLabelKnobTiesSiteToLabel) {
  auto spec = small_spec(200);
  spec.site_label_correlation = 1.0;
  const auto ds = generate_dataset(spec);
  const auto sites = ds.vocab.tokens_of(Attribute::Site);
  for (const auto& r : ds.records) {
    EXPECT_EQ(r.prompt.get(Attribute::Site), sites[static_cast<std::size_t>(r.label) % sites.size()]);
  }
}

}  // namespace
}  // namespace stethofed
