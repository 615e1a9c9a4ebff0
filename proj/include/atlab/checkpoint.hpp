#pragma once

#include <string>

#include "atlab/model.hpp"

namespace atlab {

// Versioned binary container: 8-byte magic, u32 version, u32 header length,
// JSON header (layer spec + parameter count), raw little-endian doubles.
// Round-trips parameter bits exactly.
void save_checkpoint(const std::string& path, const Mlp& model);
Mlp load_checkpoint(const std::string& path);

}  // namespace atlab
