#pragma once

#include <string>

#include "stethofed/labels.hpp"
#include "stethofed/tensor.hpp"
#include "stethofed/text_meta.hpp"

namespace stethofed {

// One labeled recording: the grid X, its metadata prompt T and label Y.
struct Record {
  std::string device;
  RespClass label = RespClass::Normal;
  MetaPrompt prompt;
  SpecGrid grid;

  friend bool operator==(const Record&, const Record&) = default;
};

}  // namespace stethofed
