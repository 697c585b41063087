#pragma once

#include <map>
#include <string>

#include "semocc/tensor.hpp"

namespace semocc {

// Flat binary parameter checkpoint. Layout: magic "OCCT", then per parameter
// (sorted by name): name length u32-LE, UTF-8 name, rank u32-LE, dims u64-LE
// each, payload f64-LE row-major.
using ParamMap = std::map<std::string, Tensor>;

void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

}  // namespace semocc
