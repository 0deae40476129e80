#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stethofed/labels.hpp"
#include "stethofed/record.hpp"
#include "stethofed/rng.hpp"
#include "stethofed/tensor.hpp"
#include "stethofed/text_meta.hpp"

namespace stethofed {

// Acquisition style of one stethoscope: grid = response (.) content + mu + noise.
struct DeviceStyle {
  std::string device_id;
  double mean_offset = 0.0;
  std::vector<double> freq_response;
  double noise_floor_sd = 0.0;
  double freq_var_scale = 0.0;
  double time_var_scale = 0.0;
};

// Per-device generator preset. mean_offset and the variation scales follow
// the device table of the ICBHI/SPRSound recordings; the variation scales
// are used for ordering only.
struct DevicePreset {
  std::string device_id;
  double mean_offset = 0.0;
  double freq_var_scale = 0.0;
  double time_var_scale = 0.0;
  std::array<double, kNumClasses> class_ratio{1.0, 0.0, 0.0, 0.0};
  std::string site;
  double pediatric_prob = 0.1;
};

// AKGC417L, LittC2SE, Litt3200, Meditron, Yunting.
std::vector<DevicePreset> table1_presets();
const DevicePreset& find_preset(const std::vector<DevicePreset>& presets, std::string_view id);

// Vocabulary covering every preset device, both age groups, both sexes and
// every preset site. Shared by all generated datasets.
Vocabulary default_vocabulary();

// Frequency response is a smoothed random walk keyed by the device name, with
// amplitude growing with freq_var_scale.
inline constexpr std::uint64_t kDefaultStyleSeed = 0x57e7'0f3dull;
DeviceStyle make_style(const DevicePreset& preset, std::size_t freq_bins,
                       std::uint64_t style_seed = kDefaultStyleSeed);

struct Transient {
  std::size_t onset = 0;
  std::size_t width = 1;
  std::size_t freq_lo = 0;
  std::size_t freq_hi = 0;  // exclusive
  double intensity = 0.0;
};

struct Ridge {
  std::size_t onset = 0;
  std::size_t duration = 0;
  std::size_t freq_lo = 0;
  std::size_t width = 1;
  double intensity = 0.0;
};

// Pathological content C. Carries no device information.
struct ContentEvent {
  RespClass label = RespClass::Normal;
  std::vector<Transient> crackles;
  std::vector<Ridge> wheezes;
};

// Per-row standard deviation of the zero-mean content bed (1/f shaped).
double bed_sd(std::size_t freq_bin);

ContentEvent sample_event(RespClass label, RngStream& stream, std::size_t freq_bins,
                          std::size_t time_frames);
SpecGrid render_content(const ContentEvent& event, RngStream& stream, std::size_t freq_bins,
                        std::size_t time_frames);
SpecGrid apply_device(const SpecGrid& x_content, const DeviceStyle& style, RngStream& stream);

struct DeviceRequest {
  DevicePreset preset;
  std::size_t count = 0;
};

struct GenerationSpec {
  std::size_t freq_bins = 64;
  std::size_t time_frames = 128;
  std::vector<DeviceRequest> devices;
  std::uint64_t seed = 20240917;
  std::uint64_t style_seed = kDefaultStyleSeed;
  // Probability that a record's site token is tied to its label instead of
  // its device. 0 keeps demographics independent of the label.
  double site_label_correlation = 0.0;
};

struct Dataset {
  Vocabulary vocab;
  std::size_t freq_bins = 0;
  std::size_t time_frames = 0;
  std::vector<Record> records;
};

// Exact per-class counts for n samples (largest-remainder rounding).
std::array<std::size_t, kNumClasses> class_quota(const std::array<double, kNumClasses>& ratio,
                                                 std::size_t n);

Dataset generate_dataset(const GenerationSpec& spec);

}  // namespace stethofed
