#include "umcam/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "umcam/error.hpp"

namespace umcam {
namespace {

void check_extents(int height, int width) {
  if (height < 1 || width < 1) {
    throw ContractError("grid extents must be >= 1, got " + std::to_string(height) + "x" + std::to_string(width));
  }
}

void check_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ContractError("non-finite value at element " + std::to_string(i));
    }
  }
}

}  // namespace

ScalarMap::ScalarMap(int height, int width) : ScalarMap(height, width, 0.0) {}

ScalarMap::ScalarMap(int height, int width, double fill) : shape_{height, width} {
  check_extents(height, width);
  if (!std::isfinite(fill)) throw ContractError("non-finite fill value");
  values_.assign(shape_.size(), fill);
}

ScalarMap::ScalarMap(int height, int width, std::vector<double> values)
    : shape_{height, width}, values_(std::move(values)) {
  check_extents(height, width);
  if (values_.size() != shape_.size()) {
    throw ContractError("value count " + std::to_string(values_.size()) + " does not match shape " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
  check_finite(values_);
}

ScalarMap ScalarMap::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ContractError("from_rows: empty input");
  const auto width = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() != width) throw ContractError("from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return ScalarMap(static_cast<int>(rows.size()), static_cast<int>(width), std::move(values));
}

double ScalarMap::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarMap::max() const { return *std::max_element(values_.begin(), values_.end()); }

BinaryMask::BinaryMask(int height, int width) : shape_{height, width} {
  check_extents(height, width);
  values_.assign(shape_.size(), 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : shape_{height, width}, values_(std::move(values)) {
  check_extents(height, width);
  if (values_.size() != shape_.size()) throw ContractError("mask value count does not match shape");
  for (auto v : values_) {
    if (v > 1) throw ContractError("mask values must be 0 or 1");
  }
}

BinaryMask BinaryMask::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ContractError("from_rows: empty input");
  const auto width = rows.front().size();
  std::vector<std::uint8_t> values;
  for (const auto& r : rows) {
    if (r.size() != width) throw ContractError("from_rows: ragged rows");
    for (int v : r) {
      if (v != 0 && v != 1) throw ContractError("mask values must be 0 or 1");
      values.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return BinaryMask(static_cast<int>(rows.size()), static_cast<int>(width), std::move(values));
}

BinaryMask BinaryMask::from_map(const ScalarMap& map) {
  std::vector<std::uint8_t> values(map.size());
  const auto src = map.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] == 1.0) {
      values[i] = 1;
    } else if (src[i] != 0.0) {
      throw ContractError("map is not binary: element " + std::to_string(i) + " = " + std::to_string(src[i]));
    }
  }
  return BinaryMask(map.height(), map.width(), std::move(values));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ScalarMap BinaryMask::to_map() const {
  std::vector<double> v(values_.begin(), values_.end());
  return ScalarMap(shape_.height, shape_.width, std::move(v));
}

FeatureBlockExport::FeatureBlockExport(int block_index, int channels, int height, int width,
                                       std::vector<double> features, std::vector<double> gradients,
                                       double class_score)
    : block_index_(block_index),
      channels_(channels),
      shape_{height, width},
      features_(std::move(features)),
      gradients_(std::move(gradients)),
      class_score_(class_score) {
  if (block_index < 0) throw ContractError("block index must be >= 0");
  if (channels < 1) throw ContractError("feature export needs at least one channel");
  check_extents(height, width);
  const std::size_t expected = static_cast<std::size_t>(channels) * shape_.size();
  if (features_.size() != expected) throw ContractError("feature tensor size does not match K x h x w");
  if (gradients_.size() != expected) {
    throw ContractError("shape mismatch between features and gradients");
  }
  check_finite(features_);
  check_finite(gradients_);
  if (!std::isfinite(class_score_)) throw ContractError("non-finite class score");
}

std::span<const double> FeatureBlockExport::channel(const std::vector<double>& v, int k) const {
  if (k < 0 || k >= channels_) throw ContractError("channel index out of range");
  return std::span<const double>(v).subspan(static_cast<std::size_t>(k) * shape_.size(), shape_.size());
}

}  // namespace umcam
