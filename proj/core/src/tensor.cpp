#include "stethofed/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>

#include "stethofed/error.hpp"

namespace stethofed {

SpecGrid::SpecGrid(std::size_t freq_bins, std::size_t time_frames, double fill)
    : freq_bins_(freq_bins), time_frames_(time_frames), values_(freq_bins * time_frames, fill) {
  if (freq_bins == 0 || time_frames == 0) {
    raise(ErrorKind::ShapeMismatch, "grid dimensions must be positive");
  }
}

SpecGrid::SpecGrid(std::size_t freq_bins, std::size_t time_frames, std::vector<double> values)
    : freq_bins_(freq_bins), time_frames_(time_frames), values_(std::move(values)) {
  if (freq_bins == 0 || time_frames == 0) {
    raise(ErrorKind::ShapeMismatch, "grid dimensions must be positive");
  }
  if (values_.size() != freq_bins * time_frames) {
    raise(ErrorKind::ShapeMismatch, "grid holds " + std::to_string(values_.size()) +
                                        " values, expected " +
                                        std::to_string(freq_bins * time_frames));
  }
}

bool SpecGrid::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double frobenius_norm(const SpecGrid& g) {
  // Scaled accumulation keeps the sum representable for large magnitudes.
  double scale = 0.0;
  for (double v : g.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double v : g.values()) {
    const double r = v / scale;
    sum += r * r;
  }
  return scale * std::sqrt(sum);
}

SpecGrid scaled(const SpecGrid& g, double factor) {
  SpecGrid out = g;
  for (double& v : out.values()) v *= factor;
  return out;
}

std::size_t ParamEntry::volume() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

const ParamEntry& Registry::add(std::string name, std::vector<std::size_t> shape) {
  ParamEntry entry{std::move(name), total_, std::move(shape)};
  total_ += entry.volume();
  entries_.push_back(std::move(entry));
  return entries_.back();
}

const ParamEntry& Registry::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  raise(ErrorKind::IncompatibleRegistry, "no parameter block named '" + std::string(name) + "'");
}

ParamVector::ParamVector(std::shared_ptr<const Registry> registry, double fill)
    : registry_(std::move(registry)), values_(registry_->total(), fill) {}

ParamVector::ParamVector(std::shared_ptr<const Registry> registry, std::vector<double> values)
    : registry_(std::move(registry)), values_(std::move(values)) {
  if (values_.size() != registry_->total()) {
    raise(ErrorKind::IncompatibleRegistry, "value count does not match registry volume");
  }
}

std::span<const double> ParamVector::block(std::string_view name) const {
  const auto& e = registry_->at(name);
  return {values_.data() + e.offset, e.volume()};
}

std::span<double> ParamVector::block(std::string_view name) {
  const auto& e = registry_->at(name);
  return {values_.data() + e.offset, e.volume()};
}

bool ParamVector::compatible(const ParamVector& other) const noexcept {
  if (!registry_ || !other.registry_) return registry_ == other.registry_;
  return registry_ == other.registry_ || *registry_ == *other.registry_;
}

bool operator==(const ParamVector& a, const ParamVector& b) {
  if (!a.compatible(b)) return false;
  return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(), b.values_.end(),
                    [](double x, double y) {
                      return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
                    });
}

void require_compatible(const ParamVector& a, const ParamVector& b) {
  if (!a.compatible(b)) {
    raise(ErrorKind::IncompatibleRegistry, "parameter registries differ");
  }
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  ParamVector out = y;
  axpy_inplace(a, x, out);
  return out;
}

void axpy_inplace(double a, const ParamVector& x, ParamVector& y) {
  require_compatible(x, y);
  auto xs = x.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += a * xs[i];
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) { return axpy(-1.0, b, a); }

ParamVector operator*(double a, const ParamVector& x) {
  ParamVector out = x;
  for (double& v : out.values()) v *= a;
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_compatible(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const ParamVector& x) { return std::sqrt(dot(x, x)); }

}  // namespace stethofed
