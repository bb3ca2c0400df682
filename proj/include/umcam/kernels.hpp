#pragma once

// Data-parallel inner loops shared by cam-fusion, geodesic, and metrics.
//
// Each kernel has a scalar reference in kernels_scalar.cpp and, on x86-64,
// an AVX2 variant in kernels_avx2.cpp. The variant is picked once at runtime
// from CPUID; UMCAM_ISA=scalar in the environment forces the reference path.
//
// Every kernel except `sum` is bit-identical across variants (same IEEE ops
// per element, no FMA contraction). `sum` reassociates and agrees to
// rounding error only.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace umcam::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  double (*sum)(std::span<const double> x);
  /// y += a * x
  void (*axpy)(double a, std::span<const double> x, std::span<double> y);
  /// x = max(x, 0)
  void (*relu)(std::span<double> x);
  /// x = x / d
  void (*divide)(std::span<double> x, double d);
  /// num += w * a;  den += w
  void (*weighted_accumulate)(std::span<const double> w, std::span<const double> a, std::span<double> num,
                              std::span<double> den);
  /// out = den > 0 ? num / den : plain_sum / count
  void (*fuse_finalize)(std::span<const double> num, std::span<const double> den, std::span<const double> plain_sum,
                        double count, std::span<double> out);
  /// Relaxes one row of a geodesic distance map from an adjacent,
  /// already-final row: dist[c] = min(dist[c], adj_dist[c+o] + |img[c] - adj_img[c+o]|)
  /// for o = 0, and o = -1, +1 when `diagonals`.
  void (*relax_from_row)(std::span<const double> adj_dist, std::span<const double> adj_img,
                         std::span<const double> img, std::span<double> dist, bool diagonals);
  /// Number of positions where both inputs are non-zero.
  std::size_t (*count_both)(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* kernels_for(Isa isa);
/// The table chosen for this process.
const KernelTable& active();

}  // namespace umcam::kernels
