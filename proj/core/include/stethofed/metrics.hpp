#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "stethofed/labels.hpp"

namespace stethofed {

// confusion[true_class][predicted_class]
using Confusion = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

struct MetricsRecord {
  double specificity = 0.0;  // S_p, percent
  double sensitivity = 0.0;  // S_e, percent
  double score = 0.0;        // (S_p + S_e) / 2
  Confusion confusion{};
};

// S_p: correct normals over all normals. S_e: exact-class hits on the three
// abnormal classes over all abnormal samples. Throws DegenerateSplit when
// either side has no samples.
MetricsRecord compute_metrics(const Confusion& confusion);

double icbhi_score(double specificity, double sensitivity);

// Two-decimal rounding that treats decimal ties (x.xx5 up to binary
// representation error) as ties and resolves them to the even digit.
double round_2dp(double value);
std::string format_2dp(double value);

}  // namespace stethofed
