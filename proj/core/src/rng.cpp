#include "stethofed/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "stethofed/error.hpp"

namespace stethofed {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t derive(std::uint64_t key, std::uint64_t label_hash) noexcept {
  return mix64(mix64(key ^ label_hash) + kGolden);
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : RngStream(seed, {}, mix64(seed + kGolden)) {}

RngStream::RngStream(std::uint64_t seed, std::vector<std::string> path, std::uint64_t key)
    : seed_(seed), path_(std::move(path)), key_(key) {}

RngStream RngStream::child(std::string_view label) const {
  auto path = path_;
  path.emplace_back(label);
  return RngStream(seed_, std::move(path), derive(key_, fnv1a(label)));
}

RngStream RngStream::child(std::uint64_t index) const {
  auto path = path_;
  path.push_back("#" + std::to_string(index));
  // Integer labels hash through a different domain than string labels.
  return RngStream(seed_, std::move(path), derive(key_, mix64(index ^ 0x5851f42d4c957f2dull)));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) raise(ErrorKind::BadRange, "below(0) has no valid result");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % n;
}

double RngStream::normal() {
  // Box-Muller; one variate per call keeps the counter arithmetic simple.
  double u1 = next_unit();
  while (u1 <= 0.0) u1 = next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double uniform(RngStream& stream, double lo, double hi) {
  if (!(lo < hi)) {
    raise(ErrorKind::BadRange,
          "uniform requires lo < hi, got [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  const double v = lo + (hi - lo) * stream.next_unit();
  // Rounding in lo + w*u can land on hi for tiny ranges.
  return v < hi ? v : std::nextafter(hi, lo);
}

double beta(RngStream& stream, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) raise(ErrorKind::BadRange, "beta parameters must be positive");
  for (;;) {
    const double u = stream.next_unit();
    const double v = stream.next_unit();
    const double x = std::pow(u, 1.0 / a);
    const double y = std::pow(v, 1.0 / b);
    const double s = x + y;
    if (s <= 1.0 && s > 0.0) return x / s;
  }
}

std::vector<std::size_t> permutation(RngStream& stream, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace stethofed
