#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace umcam {

/// Integer pixel coordinate, row-major.
struct Pixel {
  int row = 0;
  int col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct Shape2D {
  int height = 0;
  int width = 0;

  std::size_t size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  bool contains(Pixel p) const { return p.row >= 0 && p.col >= 0 && p.row < height && p.col < width; }

  friend bool operator==(const Shape2D&, const Shape2D&) = default;
};

/// Dense 2D grid of finite doubles in row-major order.
///
/// Every constructor validates the shape (both extents >= 1, value count
/// matching) and rejects NaN/Inf, so a ScalarMap in hand is always usable.
class ScalarMap {
 public:
  /// Zero-filled map.
  ScalarMap(int height, int width);
  ScalarMap(int height, int width, double fill);
  ScalarMap(int height, int width, std::vector<double> values);

  static ScalarMap from_rows(const std::vector<std::vector<double>>& rows);

  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  Shape2D shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int row, int col) const { return values_[index(row, col)]; }
  double at(Pixel p) const { return values_[index(p.row, p.col)]; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) + static_cast<std::size_t>(col);
  }

  std::span<const double> values() const { return values_; }
  std::span<const double> row(int r) const {
    return std::span<const double>(values_).subspan(index(r, 0), static_cast<std::size_t>(shape_.width));
  }

  double min() const;
  double max() const;

  /// Mutable access for kernels that build a map in place. Callers must
  /// keep values finite.
  std::span<double> mutable_values() { return values_; }
  void set(int row, int col, double v) { values_[index(row, col)] = v; }

  friend bool operator==(const ScalarMap&, const ScalarMap&) = default;

 private:
  Shape2D shape_;
  std::vector<double> values_;
};

/// Strictly binary 2D grid.
class BinaryMask {
 public:
  BinaryMask(int height, int width);
  BinaryMask(int height, int width, std::vector<std::uint8_t> values);

  static BinaryMask from_rows(const std::vector<std::vector<int>>& rows);
  /// Accepts a map whose values are exactly 0.0 or 1.0.
  static BinaryMask from_map(const ScalarMap& map);

  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  Shape2D shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  bool operator()(int row, int col) const { return values_[index(row, col)] != 0; }
  bool at(Pixel p) const { return values_[index(p.row, p.col)] != 0; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) + static_cast<std::size_t>(col);
  }
  void set(int row, int col, bool v) { values_[index(row, col)] = v ? 1 : 0; }

  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  ScalarMap to_map() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Shape2D shape_;
  std::vector<std::uint8_t> values_;
};

/// Per-block network export: K feature grids and the gradient of the
/// foreground class score with respect to each of them.
class FeatureBlockExport {
 public:
  /// `features` and `gradients` are K*h*w values in (channel, row, col) order.
  FeatureBlockExport(int block_index, int channels, int height, int width, std::vector<double> features,
                     std::vector<double> gradients, double class_score = 0.0);

  int block_index() const { return block_index_; }
  int channels() const { return channels_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  Shape2D shape() const { return shape_; }
  double class_score() const { return class_score_; }

  std::span<const double> feature(int k) const { return channel(features_, k); }
  std::span<const double> gradient(int k) const { return channel(gradients_, k); }
  std::span<const double> features() const { return features_; }
  std::span<const double> gradients() const { return gradients_; }

 private:
  std::span<const double> channel(const std::vector<double>& v, int k) const;

  int block_index_;
  int channels_;
  Shape2D shape_;
  std::vector<double> features_;
  std::vector<double> gradients_;
  double class_score_;
};

}  // namespace umcam
