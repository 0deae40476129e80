#pragma once

#include <filesystem>
#include <iosfwd>

#include "stethofed/model.hpp"

namespace stethofed {

// Checkpoint layout:
//
//   STETHOFED-CKPT 1
//   spec freq_bins=.. time_frames=.. pool_freq=.. pool_time=.. hidden=.. embed=.. classes=.. vocab=.. leak_slope=..
//   params <P>
//   entry <name> <offset> <d0>x<d1>...      (one line per block, declaration order)
//   end
//   <P little-endian IEEE-754 float64 values>
inline constexpr std::string_view kCheckpointMagic = "STETHOFED-CKPT";
inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const FlatModel& m);
FlatModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const FlatModel& m);
FlatModel load_checkpoint(const std::filesystem::path& path);

// Shared little-endian float64 helpers (also used by the dataset blob).
void write_f64_le(std::ostream& out, std::span<const double> values);
void read_f64_le(std::istream& in, std::span<double> values);

}  // namespace stethofed
