#pragma once

#include <filesystem>
#include <string>

#include "stethofed/data_synth.hpp"

namespace stethofed {

// Portable dataset = <name>.manifest (text) + <name>.blob (float64 LE,
// row-major F x T per record, records back to back).
//
// Manifest layout, one item per line:
//   RSFD-1
//   dims <F> <T>
//   classes normal crackle wheeze both
//   vocab <attribute> <token>...          (device, age_group, sex, site; in id order)
//   blob <file name relative to the manifest>
//   fields index device label age_group sex site offset
//   records <N>
//   <N record lines, whitespace separated in the order given by "fields">
inline constexpr std::string_view kDatasetFormat = "RSFD-1";

void write_dataset(const std::filesystem::path& dir, const std::string& name, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& manifest);

}  // namespace stethofed
