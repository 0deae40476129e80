#include "stethofed/augment.hpp"

#include <algorithm>
#include <cmath>

#include "stethofed/error.hpp"

namespace stethofed {

void GinConfig::validate() const {
  if (!(g_min > 0.0) || !(g_min <= g_max)) {
    raise(ErrorKind::Config, "gain range requires 0 < g_min <= g_max");
  }
  if (!(alpha_min > 0.0) || !(alpha_min <= 1.0)) {
    raise(ErrorKind::Config, "alpha_min must lie in (0, 1]");
  }
  if (num_blocks == 0) raise(ErrorKind::Config, "num_blocks must be at least 1");
  if (kernel_shapes.empty()) raise(ErrorKind::Config, "kernel_shapes must be non-empty");
  for (const auto& s : kernel_shapes) {
    if (s.freq == 0 || s.time == 0 || s.freq % 2 == 0 || s.time % 2 == 0) {
      raise(ErrorKind::Config, "kernel extents must be odd and positive");
    }
  }
  if (!(frob_eps > 0.0)) raise(ErrorKind::Config, "frob_eps must be positive");
}

std::pair<SpecGrid, double> gain_intervene(const SpecGrid& x, RngStream& stream,
                                           const GinConfig& cfg) {
  const double g = cfg.g_min < cfg.g_max ? uniform(stream, cfg.g_min, cfg.g_max) : cfg.g_min;
  return {scaled(x, g), g};
}

GinKernels sample_kernels(RngStream& stream, const GinConfig& cfg) {
  GinKernels kernels;
  kernels.blocks.reserve(cfg.num_blocks);
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    GinBlock block;
    block.shape = cfg.kernel_shapes[stream.below(cfg.kernel_shapes.size())];
    const double s = std::sqrt(3.0 / static_cast<double>(block.shape.volume()));
    block.weights.resize(block.shape.volume());
    for (double& w : block.weights) w = uniform(stream, -s, s);
    block.bias = uniform(stream, -0.1, 0.1);
    kernels.blocks.push_back(std::move(block));
  }
  return kernels;
}

namespace {

SpecGrid correlate_same(const SpecGrid& x, const GinBlock& block) {
  const auto F = x.freq_bins();
  const auto T = x.time_frames();
  const auto kf = block.shape.freq;
  const auto kt = block.shape.time;
  const auto pf = static_cast<std::ptrdiff_t>(kf / 2);
  const auto pt = static_cast<std::ptrdiff_t>(kt / 2);
  SpecGrid out(F, T, block.bias);
  for (std::size_t i = 0; i < kf; ++i) {
    for (std::size_t j = 0; j < kt; ++j) {
      const double w = block.weights[i * kt + j];
      const auto df = static_cast<std::ptrdiff_t>(i) - pf;
      const auto dt = static_cast<std::ptrdiff_t>(j) - pt;
      for (std::size_t f = 0; f < F; ++f) {
        const auto src_f = static_cast<std::ptrdiff_t>(f) + df;
        if (src_f < 0 || src_f >= static_cast<std::ptrdiff_t>(F)) continue;
        auto src = x.row(static_cast<std::size_t>(src_f));
        auto dst = out.row(f);
        const std::size_t t_lo = dt < 0 ? static_cast<std::size_t>(-dt) : 0;
        const std::size_t t_hi = dt > 0 ? T - static_cast<std::size_t>(dt) : T;
        for (std::size_t t = t_lo; t < t_hi; ++t) {
          dst[t] += w * src[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + dt)];
        }
      }
    }
  }
  return out;
}

}  // namespace

SpecGrid apply_style(const SpecGrid& x_gain, const GinKernels& kernels, const GinConfig& cfg) {
  if (x_gain.freq_bins() < 3 || x_gain.time_frames() < 3) {
    raise(ErrorKind::GridTooSmall, "style network needs at least 3x3 grids");
  }
  SpecGrid h = x_gain;
  for (std::size_t b = 0; b < kernels.blocks.size(); ++b) {
    h = correlate_same(h, kernels.blocks[b]);
    if (b + 1 < kernels.blocks.size()) {
      for (double& v : h.values()) v = v >= 0.0 ? v : cfg.leak_slope * v;
    }
  }
  return h;
}

std::vector<double> clip_alpha(std::span<const double> gates, double alpha_min) {
  std::vector<double> alpha(gates.begin(), gates.end());
  for (double& a : alpha) a = std::clamp(a, alpha_min, 1.0);
  return alpha;
}

std::vector<double> sample_alpha(RngStream& stream, const GinConfig& cfg, std::size_t freq_bins) {
  std::vector<double> gates(freq_bins);
  for (double& g : gates) g = stream.next_unit();
  return clip_alpha(gates, cfg.alpha_min);
}

SpecGrid interpolate_and_renormalize(const SpecGrid& x_gain, const SpecGrid& x_style,
                                     std::span<const double> alpha, double frob_eps) {
  if (!x_gain.same_shape(x_style) || alpha.size() != x_gain.freq_bins()) {
    raise(ErrorKind::ShapeMismatch, "interpolation operands disagree in shape");
  }
  SpecGrid mixed(x_gain.freq_bins(), x_gain.time_frames());
  for (std::size_t f = 0; f < x_gain.freq_bins(); ++f) {
    const double a = alpha[f];
    auto g = x_gain.row(f);
    auto s = x_style.row(f);
    auto m = mixed.row(f);
    for (std::size_t t = 0; t < m.size(); ++t) m[t] = a * g[t] + (1.0 - a) * s[t];
  }
  const double factor = frobenius_norm(x_gain) / (frobenius_norm(mixed) + frob_eps);
  for (double& v : mixed.values()) v *= factor;
  return mixed;
}

SpecGrid gin_augment(const SpecGrid& x, RngStream& stream, const GinKernels& kernels,
                     const GinConfig& cfg) {
  auto gain_stream = stream.child("gain");
  auto alpha_stream = stream.child("alpha");
  const auto [x_gain, g] = gain_intervene(x, gain_stream, cfg);
  const SpecGrid x_style = apply_style(x_gain, kernels, cfg);
  const auto alpha = sample_alpha(alpha_stream, cfg, x.freq_bins());
  return interpolate_and_renormalize(x_gain, x_style, alpha, cfg.frob_eps);
}

MaskBands sample_mask_bands(RngStream& stream, std::size_t freq_bins, std::size_t time_frames,
                            std::size_t max_f, std::size_t max_t) {
  if (max_f > freq_bins || max_t > time_frames) {
    raise(ErrorKind::BadRange, "mask width exceeds grid extent");
  }
  MaskBands bands;
  bands.freq_width = static_cast<std::size_t>(stream.below(max_f + 1));
  bands.freq_start = static_cast<std::size_t>(stream.below(freq_bins - bands.freq_width + 1));
  bands.time_width = static_cast<std::size_t>(stream.below(max_t + 1));
  bands.time_start = static_cast<std::size_t>(stream.below(time_frames - bands.time_width + 1));
  return bands;
}

SpecGrid apply_mask_bands(const SpecGrid& x, const MaskBands& bands) {
  if (bands.freq_start + bands.freq_width > x.freq_bins() ||
      bands.time_start + bands.time_width > x.time_frames()) {
    raise(ErrorKind::BadRange, "mask band falls outside the grid");
  }
  SpecGrid out = x;
  for (std::size_t f = bands.freq_start; f < bands.freq_start + bands.freq_width; ++f) {
    std::fill(out.row(f).begin(), out.row(f).end(), 0.0);
  }
  for (std::size_t f = 0; f < out.freq_bins(); ++f) {
    auto r = out.row(f);
    std::fill(r.begin() + static_cast<std::ptrdiff_t>(bands.time_start),
              r.begin() + static_cast<std::ptrdiff_t>(bands.time_start + bands.time_width), 0.0);
  }
  return out;
}

SpecGrid spec_mask(const SpecGrid& x, RngStream& stream, std::size_t max_f, std::size_t max_t) {
  return apply_mask_bands(x, sample_mask_bands(stream, x.freq_bins(), x.time_frames(), max_f, max_t));
}

MixedSample mixup(const SpecGrid& x1, const SpecGrid& x2, const LabelDist& y1, const LabelDist& y2,
                  double lam) {
  if (!x1.same_shape(x2)) raise(ErrorKind::ShapeMismatch, "mixup operands differ in shape");
  if (!(lam >= 0.0 && lam <= 1.0)) raise(ErrorKind::BadRange, "mixup lambda must lie in [0, 1]");
  MixedSample out{SpecGrid(x1.freq_bins(), x1.time_frames()), {}};
  auto a = x1.values();
  auto b = x2.values();
  auto m = out.grid.values();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = lam * a[i] + (1.0 - lam) * b[i];
  for (std::size_t c = 0; c < kNumClasses; ++c) out.target[c] = lam * y1[c] + (1.0 - lam) * y2[c];
  return out;
}

}  // namespace stethofed
