#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "histoprism/matrix.hpp"
#include "histoprism/synth.hpp"

namespace histoprism {

/// Named-tensor container ("HPTB0001"): magic, tensor count, then per tensor
/// name, shape and row-major f64 little-endian data. Used for slide data,
/// predictions and generator parameters.
void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, const Matrix*>>& tensors);
std::vector<std::pair<std::string, Matrix>> read_tensor_file(const std::filesystem::path& path);

/// Dataset directory: dataset.json (metadata, split assignments, spec echo),
/// slides/slide_NNNN.bin per slide, generator.bin when generator parameters
/// are present. The round trip is bit-exact.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace histoprism
