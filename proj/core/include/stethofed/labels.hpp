#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace stethofed {

inline constexpr std::size_t kNumClasses = 4;

enum class RespClass : std::size_t { Normal = 0, Crackle = 1, Wheeze = 2, Both = 3 };

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"normal", "crackle",
                                                                          "wheeze", "both"};

using LabelDist = std::array<double, kNumClasses>;

constexpr LabelDist one_hot(RespClass c) {
  LabelDist d{};
  d[static_cast<std::size_t>(c)] = 1.0;
  return d;
}

constexpr std::string_view class_name(RespClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

inline std::optional<RespClass> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<RespClass>(i);
  }
  return std::nullopt;
}

}  // namespace stethofed
