#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umcam/grid.hpp"

namespace umcam::metrics {

/// Physical size of one pixel along (row, col).
struct Spacing2D {
  double row = 1.0;
  double col = 1.0;
};

/// Physical size of one voxel along (slice, row, col).
struct Spacing3D {
  double slice = 7.0;
  double row = 1.0;
  double col = 1.0;
};

/// Binary volume assembled from equally-shaped slices, slice-major.
class MaskVolume {
 public:
  explicit MaskVolume(std::span<const BinaryMask> slices);

  int depth() const { return depth_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;

 private:
  int depth_;
  int height_;
  int width_;
  std::vector<std::uint8_t> values_;
};

/// 2|P n T| / (|P| + |T|); 1 when both are empty, 0 when exactly one is.
double dsc(const BinaryMask& pred, const BinaryMask& truth);
double dsc(const MaskVolume& pred, const MaskVolume& truth);

/// Pooled directed boundary-to-boundary distances: d(p, dT) for every
/// boundary pixel p of `pred`, followed by d(t, dP) for every boundary
/// pixel t of `truth`. A boundary pixel is a foreground pixel with a
/// background 4-neighbour or lying on the image edge. Empty when either
/// mask is empty.
std::vector<double> boundary_distances(const BinaryMask& pred, const BinaryMask& truth, Spacing2D spacing = {});
/// Volumetric variant with 6-connected boundaries.
std::vector<double> boundary_distances(const MaskVolume& pred, const MaskVolume& truth, Spacing3D spacing = {});

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// 95th percentile of the pooled boundary distances. nullopt ("undefined")
/// when either mask is empty.
std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& truth, Spacing2D spacing = {});
std::optional<double> hd95(const MaskVolume& pred, const MaskVolume& truth, Spacing3D spacing = {});

enum class EvalMode { per_slice_2d, per_volume_3d };

struct CohortItem {
  std::string slice_id;
  std::string volume_id;
  BinaryMask pred;
  BinaryMask truth;
};

struct UnitMetrics {
  std::string unit_id;
  double dsc = 0.0;
  std::optional<double> hd95;
};

struct EvalReport {
  EvalMode mode = EvalMode::per_slice_2d;
  std::vector<UnitMetrics> units;
  double mean_dsc = 0.0;
  double std_dsc = 0.0;
  /// Means over units with a defined hd95 only; nullopt when none has one.
  std::optional<double> mean_hd95;
  std::optional<double> std_hd95;
};

/// Recomputes the aggregate fields from `report.units` (population std).
void aggregate(EvalReport& report);

/// Per-slice evaluation, or per-volume evaluation on slices stacked in the
/// given order (volumes appear in first-seen order). Throws ContractError on
/// an empty list or inconsistent shapes within a volume.
EvalReport evaluate_cohort(std::span<const CohortItem> items, EvalMode mode, Spacing2D spacing_2d = {},
                           Spacing3D spacing_3d = {});

std::string report_to_json(const EvalReport& report);
/// Aligned text table with DSC in percent and a mean±std footer.
std::string report_to_table(const EvalReport& report);

}  // namespace umcam::metrics
