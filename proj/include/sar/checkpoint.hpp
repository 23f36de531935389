#pragma once

#include <string>

#include "sar/nn.hpp"

namespace sar {

// Parameter checkpoint container. Layout: magic "SARM", format version
// (u32 LE), then one record per parameter: name length (u32 LE), name bytes,
// rank (u32 LE), dims (u64 LE each), values (f64 LE, row-major).

// Writes parameter values only.
void save_params(const ParamStore& store, const std::string& path);

// Reads parameter values; gradients and Adam moments come back zeroed.
ParamStore load_params(const std::string& path);

// Same container, but carries Adam moments and the step counter so training
// can resume. Written alongside a checkpoint as "<path>.opt".
void save_optimizer_state(const ParamStore& store, const std::string& path);
void load_optimizer_state(ParamStore& store, const std::string& path);

}  // namespace sar
