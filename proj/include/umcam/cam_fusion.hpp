#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "umcam/grid.hpp"
#include "umcam/kernels.hpp"

namespace umcam::cam {

enum class FusionMode { um_cam, average_cam, last_layer_only };

FusionMode parse_fusion_mode(std::string_view text);
std::string_view to_string(FusionMode mode);

struct FusionConfig {
  /// Highest block index M; a stack holds M + 1 maps.
  int max_block = 4;
  FusionMode mode = FusionMode::um_cam;

  void validate() const;
};

/// Gradient-weighted channel combination of one block, at block resolution:
/// alpha_k = mean of dy/df_k over the grid, A = ReLU(sum_k alpha_k f_k).
ScalarMap grad_cam(const FeatureBlockExport& block);
ScalarMap grad_cam(const FeatureBlockExport& block, const kernels::KernelTable& k);

/// Bilinear resize with pixel-centre alignment and edge clamping.
ScalarMap upsample_bilinear(const ScalarMap& map, int target_height, int target_width);

/// Divides by the maximum. An all-zero map is returned unchanged.
ScalarMap normalize_max(const ScalarMap& map);

/// w = 1 - H(p) with H the base-2 binary entropy of (p, 1 - p).
ScalarMap entropy_weight(const ScalarMap& map);

/// Normalised activation maps from blocks 0..M, all at image resolution.
class CamStack {
 public:
  /// Each map must lie in [0, 1] with maximum 1 unless identically zero.
  explicit CamStack(std::vector<ScalarMap> maps);

  /// grad_cam -> upsample to (height, width) -> normalize_max, per block,
  /// ordered by block index.
  static CamStack from_exports(std::span<const FeatureBlockExport> exports, int height, int width);

  std::size_t size() const { return maps_.size(); }
  const ScalarMap& operator[](std::size_t m) const { return maps_[m]; }
  const std::vector<ScalarMap>& maps() const { return maps_; }
  Shape2D shape() const { return maps_.front().shape(); }

 private:
  std::vector<ScalarMap> maps_;
};

/// Fuses the stack according to `config.mode`:
///  - um_cam: per-pixel entropy-weighted mean, plain mean where all weights vanish;
///  - average_cam: plain mean;
///  - last_layer_only: the block-M map.
/// The stack must hold exactly M + 1 maps.
ScalarMap fuse(const CamStack& stack, const FusionConfig& config);

/// 1 where value > threshold.
BinaryMask binarize(const ScalarMap& map, double threshold);

struct ThresholdChoice {
  double threshold = 0.0;
  double mean_dsc = 0.0;
};

/// Candidate thresholds t / 100 for t = 0..99.
std::vector<double> threshold_grid();

/// Threshold from the grid that maximises mean DSC over the pairs; the
/// smallest one wins ties.
ThresholdChoice grid_search_threshold(std::span<const ScalarMap> maps, std::span<const BinaryMask> truths);

}  // namespace umcam::cam
