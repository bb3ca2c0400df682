#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "umcam/grid.hpp"

namespace umcam::io {

enum class NpyDtype { float32, float64 };

/// Raw decoded NPY payload (C-order, widened to double).
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  NpyDtype dtype = NpyDtype::float64;
};

/// K x h x w stack of channel grids, as stored in a 3D array file.
struct ChannelStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;
};

/// Parses an NPY v1.0 file. Accepts little-endian f4/f8, C-order only.
/// Throws IoError / FormatError with the path and, where meaningful, the
/// byte offset of the problem.
NpyArray read_npy(const std::filesystem::path& path);

/// Writes an NPY v1.0 file with a 64-byte aligned header.
void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<double>& data, NpyDtype dtype = NpyDtype::float32);

/// Reads a 2D file as a map or a 3D file as a channel stack.
std::variant<ScalarMap, ChannelStack> read_array(const std::filesystem::path& path);

ScalarMap read_map(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);
ChannelStack read_stack(const std::filesystem::path& path);

/// Builds a FeatureBlockExport from a features file and a gradients file.
FeatureBlockExport read_feature_export(const std::filesystem::path& features_path,
                                       const std::filesystem::path& gradients_path, int block_index,
                                       double class_score = 0.0);

void write_map(const ScalarMap& map, const std::filesystem::path& path, NpyDtype dtype = NpyDtype::float32);
/// Masks are stored as a 0.0/1.0 float grid.
void write_mask(const BinaryMask& mask, const std::filesystem::path& path, NpyDtype dtype = NpyDtype::float32);
void write_stack(const ChannelStack& stack, const std::filesystem::path& path,
                 NpyDtype dtype = NpyDtype::float32);

}  // namespace umcam::io
