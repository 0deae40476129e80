#include "stethofed/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "stethofed/error.hpp"

namespace stethofed {

MetricsRecord compute_metrics(const Confusion& confusion) {
  std::uint64_t normal_total = 0;
  std::uint64_t abnormal_total = 0;
  std::uint64_t abnormal_hits = 0;
  for (std::size_t j = 0; j < kNumClasses; ++j) normal_total += confusion[0][j];
  for (std::size_t i = 1; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) abnormal_total += confusion[i][j];
    abnormal_hits += confusion[i][i];
  }
  if (normal_total == 0 || abnormal_total == 0) {
    raise(ErrorKind::DegenerateSplit, "metrics need at least one normal and one abnormal sample");
  }
  MetricsRecord m;
  m.confusion = confusion;
  m.specificity = 100.0 * static_cast<double>(confusion[0][0]) / static_cast<double>(normal_total);
  m.sensitivity = 100.0 * static_cast<double>(abnormal_hits) / static_cast<double>(abnormal_total);
  m.score = icbhi_score(m.specificity, m.sensitivity);
  return m;
}

double icbhi_score(double specificity, double sensitivity) {
  return (specificity + sensitivity) / 2.0;
}

double round_2dp(double value) {
  const double scaled = value * 100.0;
  const double lower = std::floor(scaled);
  const double frac = scaled - lower;
  constexpr double kTieWindow = 1e-9;
  if (std::abs(frac - 0.5) < kTieWindow) {
    const bool lower_even = std::fmod(lower, 2.0) == 0.0;
    return (lower_even ? lower : lower + 1.0) / 100.0;
  }
  return std::round(scaled) / 100.0;
}

std::string format_2dp(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round_2dp(value));
  return buf;
}

}  // namespace stethofed
