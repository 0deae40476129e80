#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stethofed {

// Counter-based random stream keyed by (seed, path). A draw is a pure
// function of (key, counter), so the sequence depends only on how the stream
// was derived and never on thread scheduling or on draws made elsewhere.
//
// Child streams are derived by appending a label to the path; deriving a
// child does not advance the parent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream child(std::string_view label) const;
  RngStream child(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& path() const noexcept { return path_; }
  std::uint64_t draws() const noexcept { return counter_; }

  std::uint64_t next_u64();
  // 53-bit uniform in [0, 1).
  double next_unit();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  RngStream(std::uint64_t seed, std::vector<std::string> path, std::uint64_t key);

  std::uint64_t seed_;
  std::vector<std::string> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Uniform draw in [lo, hi). Throws BadRange when lo >= hi.
double uniform(RngStream& stream, double lo, double hi);

// Beta(a, b) draw via Johnk's rejection method; intended for a, b <= 1.
double beta(RngStream& stream, double a, double b);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(RngStream& stream, std::size_t n);

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace stethofed
