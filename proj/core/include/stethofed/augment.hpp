#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "stethofed/labels.hpp"
#include "stethofed/rng.hpp"
#include "stethofed/tensor.hpp"

namespace stethofed {

// (frequency extent, time extent) of a style-convolution kernel.
struct KernelShape {
  std::size_t freq = 1;
  std::size_t time = 1;

  std::size_t volume() const noexcept { return freq * time; }
  friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

struct GinConfig {
  double g_min = 0.8;
  double g_max = 1.2;
  double alpha_min = 0.25;
  std::size_t num_blocks = 2;
  std::vector<KernelShape> kernel_shapes = {{1, 1}, {1, 3}, {3, 1}};
  double leak_slope = 0.2;
  double frob_eps = 1e-8;

  // Throws Config on any violated invariant.
  void validate() const;
};

struct GinBlock {
  KernelShape shape;
  std::vector<double> weights;  // row-major, shape.freq x shape.time
  double bias = 0.0;

  friend bool operator==(const GinBlock&, const GinBlock&) = default;
};

// Random, non-trainable style network. Drawn once per mini-batch.
struct GinKernels {
  std::vector<GinBlock> blocks;

  friend bool operator==(const GinKernels&, const GinKernels&) = default;
};

// Returns (g * x, g) with g ~ U(g_min, g_max).
std::pair<SpecGrid, double> gain_intervene(const SpecGrid& x, RngStream& stream,
                                           const GinConfig& cfg);

GinKernels sample_kernels(RngStream& stream, const GinConfig& cfg);

// Runs the block stack: zero-padded same-size correlation, bias, then leaky
// rectification between blocks (not after the last one).
SpecGrid apply_style(const SpecGrid& x_gain, const GinKernels& kernels, const GinConfig& cfg);

// Per-frequency interpolation mask clip(gate, alpha_min, 1).
std::vector<double> clip_alpha(std::span<const double> gates, double alpha_min);
std::vector<double> sample_alpha(RngStream& stream, const GinConfig& cfg, std::size_t freq_bins);

// alpha (.) x_gain + (1 - alpha) (.) x_style, rescaled to the Frobenius norm
// of x_gain. alpha holds one entry per frequency bin.
SpecGrid interpolate_and_renormalize(const SpecGrid& x_gain, const SpecGrid& x_style,
                                     std::span<const double> alpha, double frob_eps);

// Full pipeline for one sample: gain, style, mask, mix, renormalize.
SpecGrid gin_augment(const SpecGrid& x, RngStream& stream, const GinKernels& kernels,
                     const GinConfig& cfg);

struct MaskBands {
  std::size_t freq_start = 0;
  std::size_t freq_width = 0;
  std::size_t time_start = 0;
  std::size_t time_width = 0;
};

MaskBands sample_mask_bands(RngStream& stream, std::size_t freq_bins, std::size_t time_frames,
                            std::size_t max_f, std::size_t max_t);
SpecGrid apply_mask_bands(const SpecGrid& x, const MaskBands& bands);
// Zeroes one frequency band of width <= max_f and one time band of width <= max_t.
SpecGrid spec_mask(const SpecGrid& x, RngStream& stream, std::size_t max_f, std::size_t max_t);

struct MixedSample {
  SpecGrid grid;
  LabelDist target;
};

MixedSample mixup(const SpecGrid& x1, const SpecGrid& x2, const LabelDist& y1, const LabelDist& y2,
                  double lam);

}  // namespace stethofed
