#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "clue/numerics/mlp.hpp"

namespace clue::nn {

// Binary parameter record:
//   "CLUENN1\0" | u32 layer count | (u32 in, u32 out) per layer |
//   per layer: f64 weight (out x in, row-major) then f64 bias (out)
// all little-endian. A checkpoint file is one or more records back to back;
// the JSON sidecar names them.
using LayerStack = std::vector<Dense>;

void write_record(std::ostream& os, const LayerStack& layers);
LayerStack read_record(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const std::vector<LayerStack>& records);
std::vector<LayerStack> load_checkpoint(const std::filesystem::path& path);

// A bare vector stored as a single layer with zero inputs.
LayerStack vector_record(const Vector& v);
Vector vector_from_record(const LayerStack& record);

}  // namespace clue::nn
