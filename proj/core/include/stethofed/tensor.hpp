#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stethofed {

// F x T grid of log-magnitude values, stored frequency-major so that one
// frequency bin is a contiguous row.
class SpecGrid {
 public:
  SpecGrid() = default;
  SpecGrid(std::size_t freq_bins, std::size_t time_frames, double fill = 0.0);
  SpecGrid(std::size_t freq_bins, std::size_t time_frames, std::vector<double> values);

  std::size_t freq_bins() const noexcept { return freq_bins_; }
  std::size_t time_frames() const noexcept { return time_frames_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool same_shape(const SpecGrid& other) const noexcept {
    return freq_bins_ == other.freq_bins_ && time_frames_ == other.time_frames_;
  }

  double operator()(std::size_t f, std::size_t t) const { return values_[f * time_frames_ + t]; }
  double& operator()(std::size_t f, std::size_t t) { return values_[f * time_frames_ + t]; }

  std::span<const double> row(std::size_t f) const {
    return {values_.data() + f * time_frames_, time_frames_};
  }
  std::span<double> row(std::size_t f) { return {values_.data() + f * time_frames_, time_frames_}; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const SpecGrid&, const SpecGrid&) = default;

 private:
  std::size_t freq_bins_ = 0;
  std::size_t time_frames_ = 0;
  std::vector<double> values_;
};

double frobenius_norm(const SpecGrid& g);
SpecGrid scaled(const SpecGrid& g, double factor);

struct ParamEntry {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;

  std::size_t volume() const noexcept;
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

// Ordered (name, offset, shape) table describing a flat parameter vector.
class Registry {
 public:
  const ParamEntry& add(std::string name, std::vector<std::size_t> shape);

  std::span<const ParamEntry> entries() const noexcept { return entries_; }
  std::size_t total() const noexcept { return total_; }
  const ParamEntry& at(std::string_view name) const;

  friend bool operator==(const Registry&, const Registry&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const Registry> registry, double fill = 0.0);
  ParamVector(std::shared_ptr<const Registry> registry, std::vector<double> values);

  const Registry& registry() const { return *registry_; }
  const std::shared_ptr<const Registry>& registry_ptr() const noexcept { return registry_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> block(std::string_view name) const;
  std::span<double> block(std::string_view name);

  bool compatible(const ParamVector& other) const noexcept;

  // Values equal bit-for-bit and registries identical.
  friend bool operator==(const ParamVector& a, const ParamVector& b);

 private:
  std::shared_ptr<const Registry> registry_;
  std::vector<double> values_;
};

// Throws IncompatibleRegistry unless a and b share an identical registry.
void require_compatible(const ParamVector& a, const ParamVector& b);

// a*x + y; registries preserved.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);
// y <- a*x + y
void axpy_inplace(double a, const ParamVector& x, ParamVector& y);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector operator*(double a, const ParamVector& x);
double dot(const ParamVector& a, const ParamVector& b);
double l2_norm(const ParamVector& x);

}  // namespace stethofed
