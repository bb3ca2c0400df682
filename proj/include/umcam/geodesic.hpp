#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "umcam/grid.hpp"
#include "umcam/kernels.hpp"

namespace umcam::geo {

enum class Connectivity { four = 4, eight = 8 };
enum class Solver { raster_scan, dijkstra };

Solver parse_solver(std::string_view text);
std::string_view to_string(Solver solver);

struct GeodesicConfig {
  /// Decay of the exponential transform e^(-alpha * D).
  double alpha = 1.0;
  Connectivity connectivity = Connectivity::eight;
  Solver solver = Solver::raster_scan;
  /// Upper bound on forward+backward round trips; stops early once a round
  /// trip changes nothing.
  int raster_passes = 2;
  int bbox_margin = 0;

  void validate() const;
};

struct SeedSet {
  std::vector<Pixel> foreground;
  std::vector<Pixel> background;
};

/// Foreground seed: the centroid of the mask, rounded half-up per axis and
/// snapped to the nearest foreground pixel if it falls off the mask.
/// Background seeds: the corners of the tight bounding box grown by
/// `bbox_margin` and clipped to the image, minus duplicates and any corner
/// that coincides with the foreground seed.
/// Throws ContractError("no foreground evidence") on an empty mask, and when
/// no background corner survives.
SeedSet extract_seeds(const BinaryMask& mask, const GeodesicConfig& config);

struct GeodesicResult {
  ScalarMap distance;
  /// Round trips performed (raster solver) or 0 (dijkstra).
  int passes = 0;
  /// True when the final round trip changed nothing, always true for dijkstra.
  bool converged = true;
};

/// Minimal path cost from the nearest seed, where one step between
/// neighbouring pixels p, q costs |I(p) - I(q)|.
ScalarMap geodesic_distance(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config);
GeodesicResult geodesic_solve(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config,
                              const kernels::KernelTable& k = kernels::active());

/// e^(-alpha * D), pointwise.
ScalarMap egd_map(const ScalarMap& distance, double alpha);

/// Background and foreground cue maps, both in (0, 1].
struct PseudoLabel {
  ScalarMap background;
  ScalarMap foreground;
};

PseudoLabel build_spl(const ScalarMap& image, const SeedSet& seeds, const GeodesicConfig& config);

/// Foreground probability P_f / (P_f + P_b).
ScalarMap spl_to_soft_target(const PseudoLabel& label);

}  // namespace umcam::geo
