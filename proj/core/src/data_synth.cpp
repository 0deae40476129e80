#include "stethofed/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stethofed/error.hpp"

namespace stethofed {
namespace {

std::array<double, kNumClasses> ratio_from_counts(std::array<double, kNumClasses> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double& c : counts) c /= total;
  return counts;
}

// Content constants, in grid units (dB-like).
constexpr double kBedLowSd = 2.0;
constexpr double kBedCorner = 16.0;
constexpr double kCrackleMin = 8.0;
constexpr double kCrackleMax = 14.0;
constexpr double kWheezeMin = 10.0;
constexpr double kWheezeMax = 14.0;
constexpr std::size_t kMinGrid = 8;

std::size_t draw_between(RngStream& s, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(s.below(hi - lo + 1));
}

}  // namespace

std::vector<DevicePreset> table1_presets() {
  return {
      {"AKGC417L", -51.31, 3275.76, 47239.05, ratio_from_counts({1879, 1503, 443, 315}), "site_1",
       0.10},
      {"LittC2SE", -90.53, 1540.72, 11640.13, ratio_from_counts({672, 132, 252, 88}), "site_1",
       0.10},
      {"Litt3200", -77.62, 409.18, 1141.44, ratio_from_counts({646, 48, 186, 26}), "site_2", 0.10},
      {"Meditron", -77.34, 2487.34, 20810.60, ratio_from_counts({995, 174, 133, 19}), "site_2",
       0.10},
      {"Yunting", -82.73, 388.91, 2102.70, ratio_from_counts({6199, 1044, 757, 31}), "site_3",
       0.95},
  };
}

const DevicePreset& find_preset(const std::vector<DevicePreset>& presets, std::string_view id) {
  for (const auto& p : presets) {
    if (p.device_id == id) return p;
  }
  raise(ErrorKind::Config, "unknown device preset '" + std::string(id) + "'");
}

Vocabulary default_vocabulary() {
  Vocabulary v;
  for (const auto& p : table1_presets()) v.add(Attribute::Device, p.device_id);
  v.add(Attribute::AgeGroup, "pediatric");
  v.add(Attribute::AgeGroup, "adult");
  v.add(Attribute::Sex, "female");
  v.add(Attribute::Sex, "male");
  v.add(Attribute::Site, "site_1");
  v.add(Attribute::Site, "site_2");
  v.add(Attribute::Site, "site_3");
  return v;
}

DeviceStyle make_style(const DevicePreset& preset, std::size_t freq_bins,
                       std::uint64_t style_seed) {
  static const double max_sf = [] {
    double m = 0.0;
    for (const auto& p : table1_presets()) m = std::max(m, p.freq_var_scale);
    return m;
  }();
  static const double max_st = [] {
    double m = 0.0;
    for (const auto& p : table1_presets()) m = std::max(m, p.time_var_scale);
    return m;
  }();

  auto stream = RngStream(style_seed).child("style").child(preset.device_id);
  std::vector<double> walk(freq_bins);
  double acc = 0.0;
  for (double& w : walk) {
    acc += stream.normal();
    w = acc;
  }
  // Moving-average smoothing, window 9.
  std::vector<double> smooth(freq_bins);
  for (std::size_t f = 0; f < freq_bins; ++f) {
    const std::size_t lo = f >= 4 ? f - 4 : 0;
    const std::size_t hi = std::min(freq_bins, f + 5);
    smooth[f] = std::accumulate(walk.begin() + static_cast<std::ptrdiff_t>(lo),
                                walk.begin() + static_cast<std::ptrdiff_t>(hi), 0.0) /
                static_cast<double>(hi - lo);
  }
  const double mean = std::accumulate(smooth.begin(), smooth.end(), 0.0) / freq_bins;
  double var = 0.0;
  for (double v : smooth) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(freq_bins));

  const double amp = 0.4 * std::sqrt(preset.freq_var_scale / max_sf);
  DeviceStyle style;
  style.device_id = preset.device_id;
  style.mean_offset = preset.mean_offset;
  style.freq_var_scale = preset.freq_var_scale;
  style.time_var_scale = preset.time_var_scale;
  style.noise_floor_sd = 0.5 + 1.5 * std::sqrt(preset.time_var_scale / max_st);
  style.freq_response.resize(freq_bins);
  for (std::size_t f = 0; f < freq_bins; ++f) {
    const double z = sd > 0.0 ? (smooth[f] - mean) / sd : 0.0;
    style.freq_response[f] = std::exp(amp * z);
  }
  return style;
}

double bed_sd(std::size_t freq_bin) {
  return kBedLowSd / (1.0 + static_cast<double>(freq_bin) / kBedCorner);
}

ContentEvent sample_event(RespClass label, RngStream& stream, std::size_t freq_bins,
                          std::size_t time_frames) {
  if (freq_bins < kMinGrid || time_frames < kMinGrid) {
    raise(ErrorKind::GridTooSmall, "content grids need at least 8x8 entries");
  }
  ContentEvent ev;
  ev.label = label;
  const bool crackle = label == RespClass::Crackle || label == RespClass::Both;
  const bool wheeze = label == RespClass::Wheeze || label == RespClass::Both;
  if (crackle) {
    const auto n = draw_between(stream, 2, 5);
    for (std::size_t i = 0; i < n; ++i) {
      Transient tr;
      tr.width = draw_between(stream, 1, 3);
      tr.onset = static_cast<std::size_t>(stream.below(time_frames - tr.width + 1));
      tr.freq_lo = static_cast<std::size_t>(stream.below(freq_bins / 4));
      tr.freq_hi = freq_bins - static_cast<std::size_t>(stream.below(freq_bins / 4));
      tr.intensity = uniform(stream, kCrackleMin, kCrackleMax);
      ev.crackles.push_back(tr);
    }
  }
  if (wheeze) {
    const auto n = draw_between(stream, 1, 2);
    for (std::size_t i = 0; i < n; ++i) {
      Ridge r;
      const std::size_t min_dur = (time_frames + 2) / 3;
      r.duration = draw_between(stream, min_dur, (2 * time_frames) / 3);
      r.onset = static_cast<std::size_t>(stream.below(time_frames - r.duration + 1));
      r.width = draw_between(stream, 2, 4);
      r.freq_lo = draw_between(stream, freq_bins / 8, freq_bins / 2);
      r.intensity = uniform(stream, kWheezeMin, kWheezeMax);
      ev.wheezes.push_back(r);
    }
  }
  return ev;
}

SpecGrid render_content(const ContentEvent& event, RngStream& stream, std::size_t freq_bins,
                        std::size_t time_frames) {
  if (freq_bins < kMinGrid || time_frames < kMinGrid) {
    raise(ErrorKind::GridTooSmall, "content grids need at least 8x8 entries");
  }
  SpecGrid x(freq_bins, time_frames);
  // Bounded (uniform) bed noise so a normal grid never exceeds 3 sd.
  constexpr double kHalfWidth = 1.7320508075688772;  // sqrt(3)
  for (std::size_t f = 0; f < freq_bins; ++f) {
    const double sd = bed_sd(f);
    for (double& v : x.row(f)) v = sd * kHalfWidth * (2.0 * stream.next_unit() - 1.0);
  }
  for (const auto& tr : event.crackles) {
    for (std::size_t f = tr.freq_lo; f < std::min(tr.freq_hi, freq_bins); ++f) {
      auto row = x.row(f);
      for (std::size_t t = tr.onset; t < std::min(tr.onset + tr.width, time_frames); ++t) {
        row[t] += tr.intensity;
      }
    }
  }
  for (const auto& r : event.wheezes) {
    for (std::size_t f = r.freq_lo; f < std::min(r.freq_lo + r.width, freq_bins); ++f) {
      auto row = x.row(f);
      for (std::size_t t = r.onset; t < std::min(r.onset + r.duration, time_frames); ++t) {
        row[t] += r.intensity;
      }
    }
  }
  return x;
}

SpecGrid apply_device(const SpecGrid& x_content, const DeviceStyle& style, RngStream& stream) {
  if (style.freq_response.size() != x_content.freq_bins()) {
    raise(ErrorKind::ShapeMismatch, "frequency response length differs from grid height");
  }
  SpecGrid out(x_content.freq_bins(), x_content.time_frames());
  for (std::size_t f = 0; f < out.freq_bins(); ++f) {
    const double gain = style.freq_response[f];
    auto src = x_content.row(f);
    auto dst = out.row(f);
    for (std::size_t t = 0; t < dst.size(); ++t) {
      double v = gain * src[t] + style.mean_offset;
      if (style.noise_floor_sd > 0.0) v += style.noise_floor_sd * stream.normal();
      dst[t] = v;
    }
  }
  return out;
}

std::array<std::size_t, kNumClasses> class_quota(const std::array<double, kNumClasses>& ratio,
                                                 std::size_t n) {
  const double total = std::accumulate(ratio.begin(), ratio.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    raise(ErrorKind::BadRatio, "class ratios sum to " + std::to_string(total));
  }
  for (double r : ratio) {
    if (!(r >= 0.0)) raise(ErrorKind::BadRatio, "class ratios must be non-negative");
  }
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = ratio[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[order[i % kNumClasses]] += 1;
  return counts;
}

Dataset generate_dataset(const GenerationSpec& spec) {
  if (spec.freq_bins < kMinGrid || spec.time_frames < kMinGrid) {
    raise(ErrorKind::GridTooSmall, "content grids need at least 8x8 entries");
  }
  if (!(spec.site_label_correlation >= 0.0 && spec.site_label_correlation <= 1.0)) {
    raise(ErrorKind::Config, "site_label_correlation must lie in [0, 1]");
  }
  Dataset ds;
  ds.vocab = default_vocabulary();
  ds.freq_bins = spec.freq_bins;
  ds.time_frames = spec.time_frames;

  const auto age_tokens = ds.vocab.tokens_of(Attribute::AgeGroup);  // pediatric, adult
  const auto sex_tokens = ds.vocab.tokens_of(Attribute::Sex);
  const auto site_tokens = ds.vocab.tokens_of(Attribute::Site);
  const RngStream root(spec.seed);

  for (const auto& req : spec.devices) {
    if (req.count == 0) {
      raise(ErrorKind::Config, "device " + req.preset.device_id + " needs at least one record");
    }
    const DeviceStyle style = make_style(req.preset, spec.freq_bins, spec.style_seed);
    const auto dev_stream = root.child("device").child(req.preset.device_id);

    // Labels are fixed before any style is applied.
    const auto quota = class_quota(req.preset.class_ratio, req.count);
    std::vector<RespClass> labels;
    labels.reserve(req.count);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      labels.insert(labels.end(), quota[c], static_cast<RespClass>(c));
    }
    auto shuffle = dev_stream.child("labels");
    const auto order = permutation(shuffle, labels.size());

    const TokenId device_token = ds.vocab.id(req.preset.device_id);
    const TokenId home_site = ds.vocab.id(req.preset.site);
    for (std::size_t i = 0; i < req.count; ++i) {
      const auto rec_stream = dev_stream.child("record").child(i);
      Record rec;
      rec.device = req.preset.device_id;
      rec.label = labels[order[i]];

      auto event_stream = rec_stream.child("event");
      auto content_stream = rec_stream.child("content");
      auto noise_stream = rec_stream.child("noise");
      auto demo_stream = rec_stream.child("demographics");
      const auto event = sample_event(rec.label, event_stream, spec.freq_bins, spec.time_frames);
      rec.grid = apply_device(render_content(event, content_stream, spec.freq_bins,
                                             spec.time_frames),
                              style, noise_stream);

      rec.prompt.set(Attribute::Device, device_token);
      const bool pediatric = demo_stream.next_unit() < req.preset.pediatric_prob;
      rec.prompt.set(Attribute::AgeGroup, age_tokens[pediatric ? 0 : 1]);
      rec.prompt.set(Attribute::Sex, sex_tokens[demo_stream.below(sex_tokens.size())]);
      const bool tied = demo_stream.next_unit() < spec.site_label_correlation;
      rec.prompt.set(Attribute::Site,
                     tied ? site_tokens[static_cast<std::size_t>(rec.label) % site_tokens.size()]
                          : home_site);
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace stethofed
