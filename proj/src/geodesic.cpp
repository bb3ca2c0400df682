#include "umcam/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <queue>
#include <string>

#include "umcam/error.hpp"

namespace umcam::geo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> seeded_field(const ScalarMap& image, std::span<const Pixel> seeds) {
  if (seeds.empty()) throw ContractError("geodesic_distance: empty seed list");
  std::vector<double> d(image.size(), kInf);
  for (const auto& s : seeds) {
    if (!image.shape().contains(s)) {
      throw ContractError("geodesic_distance: seed (" + std::to_string(s.row) + ", " + std::to_string(s.col) +
                          ") is out of bounds");
    }
    d[image.index(s.row, s.col)] = 0.0;
  }
  return d;
}

// One forward (top-left to bottom-right) or backward sweep. Rows are
// relaxed from the previous row with the vector kernel, then along the row
// with the loop-carried horizontal dependency.
void raster_sweep(const ScalarMap& image, std::vector<double>& d, bool forward, bool diagonals,
                  const kernels::KernelTable& k) {
  const int H = image.height();
  const int W = image.width();
  auto row_span = [&](int r) {
    return std::span<double>(d).subspan(static_cast<std::size_t>(r) * W, static_cast<std::size_t>(W));
  };
  for (int i = 0; i < H; ++i) {
    const int r = forward ? i : H - 1 - i;
    const auto cur_img = image.row(r);
    auto cur = row_span(r);
    if (i > 0) {
      const int adj = forward ? r - 1 : r + 1;
      k.relax_from_row(row_span(adj), image.row(adj), cur_img, cur, diagonals);
    }
    if (forward) {
      for (int c = 1; c < W; ++c) cur[c] = std::min(cur[c], cur[c - 1] + std::abs(cur_img[c] - cur_img[c - 1]));
    } else {
      for (int c = W - 2; c >= 0; --c) {
        cur[c] = std::min(cur[c], cur[c + 1] + std::abs(cur_img[c] - cur_img[c + 1]));
      }
    }
  }
}

GeodesicResult solve_raster(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config,
                            const kernels::KernelTable& k) {
  auto d = seeded_field(image, seeds);
  const bool diagonals = config.connectivity == Connectivity::eight;
  std::vector<double> before(d.size());
  int passes = 0;
  bool converged = false;
  while (passes < config.raster_passes) {
    std::memcpy(before.data(), d.data(), d.size() * sizeof(double));
    raster_sweep(image, d, true, diagonals, k);
    raster_sweep(image, d, false, diagonals, k);
    ++passes;
    if (std::memcmp(before.data(), d.data(), d.size() * sizeof(double)) == 0) {
      converged = true;
      break;
    }
  }
  return {ScalarMap(image.height(), image.width(), std::move(d)), passes, converged};
}

GeodesicResult solve_dijkstra(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config) {
  auto d = seeded_field(image, seeds);
  const int H = image.height();
  const int W = image.width();
  const auto img = image.values();
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) queue.push({0.0, i});
  }
  static constexpr int kOffsets[8][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  const int neighbours = config.connectivity == Connectivity::eight ? 8 : 4;
  std::vector<std::uint8_t> done(d.size(), 0);
  while (!queue.empty()) {
    const auto [dist, idx] = queue.top();
    queue.pop();
    if (done[idx]) continue;
    done[idx] = 1;
    const int r = static_cast<int>(idx / static_cast<std::size_t>(W));
    const int c = static_cast<int>(idx % static_cast<std::size_t>(W));
    for (int n = 0; n < neighbours; ++n) {
      const int nr = r + kOffsets[n][0];
      const int nc = c + kOffsets[n][1];
      if (nr < 0 || nc < 0 || nr >= H || nc >= W) continue;
      const std::size_t j = image.index(nr, nc);
      if (done[j]) continue;
      const double cand = dist + std::abs(img[j] - img[idx]);
      if (cand < d[j]) {
        d[j] = cand;
        queue.push({cand, j});
      }
    }
  }
  return {ScalarMap(H, W, std::move(d)), 0, true};
}

}  // namespace

Solver parse_solver(std::string_view text) {
  if (text == "raster_scan") return Solver::raster_scan;
  if (text == "dijkstra") return Solver::dijkstra;
  throw ContractError("unknown geodesic solver '" + std::string(text) + "'");
}

std::string_view to_string(Solver solver) { return solver == Solver::raster_scan ? "raster_scan" : "dijkstra"; }

void GeodesicConfig::validate() const {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw ContractError("geodesic: alpha must be finite and > 0");
  if (connectivity != Connectivity::four && connectivity != Connectivity::eight) {
    throw ContractError("geodesic: connectivity must be 4 or 8");
  }
  if (raster_passes < 1) throw ContractError("geodesic: raster_passes must be >= 1");
  if (bbox_margin < 0) throw ContractError("geodesic: bbox_margin must be >= 0");
}

SeedSet extract_seeds(const BinaryMask& mask, const GeodesicConfig& config) {
  config.validate();
  const int H = mask.height();
  const int W = mask.width();
  double sum_r = 0.0, sum_c = 0.0;
  std::size_t count = 0;
  int rmin = H, rmax = -1, cmin = W, cmax = -1;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!mask(r, c)) continue;
      sum_r += r;
      sum_c += c;
      ++count;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }
  if (count == 0) throw ContractError("no foreground evidence");

  Pixel centre{static_cast<int>(std::floor(sum_r / static_cast<double>(count) + 0.5)),
               static_cast<int>(std::floor(sum_c / static_cast<double>(count) + 0.5))};
  if (!mask.at(centre)) {
    // Concave region: nearest foreground pixel, first in row-major order on ties.
    long best = -1;
    Pixel snapped = centre;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (!mask(r, c)) continue;
        const long dr = r - centre.row;
        const long dc = c - centre.col;
        const long d2 = dr * dr + dc * dc;
        if (best < 0 || d2 < best) {
          best = d2;
          snapped = {r, c};
        }
      }
    }
    centre = snapped;
  }

  const int m = config.bbox_margin;
  const int top = std::max(0, rmin - m);
  const int bottom = std::min(H - 1, rmax + m);
  const int left = std::max(0, cmin - m);
  const int right = std::min(W - 1, cmax + m);

  SeedSet seeds;
  seeds.foreground.push_back(centre);
  for (Pixel corner : {Pixel{top, left}, Pixel{top, right}, Pixel{bottom, left}, Pixel{bottom, right}}) {
    if (corner == centre) continue;
    if (std::find(seeds.background.begin(), seeds.background.end(), corner) != seeds.background.end()) continue;
    seeds.background.push_back(corner);
  }
  if (seeds.background.empty()) {
    throw ContractError("no background seed left after resolving collisions with the foreground seed");
  }
  return seeds;
}

ScalarMap geodesic_distance(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config) {
  return geodesic_solve(image, seeds, config).distance;
}

GeodesicResult geodesic_solve(const ScalarMap& image, std::span<const Pixel> seeds, const GeodesicConfig& config,
                              const kernels::KernelTable& k) {
  config.validate();
  if (config.solver == Solver::dijkstra) return solve_dijkstra(image, seeds, config);
  return solve_raster(image, seeds, config, k);
}

ScalarMap egd_map(const ScalarMap& distance, double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw ContractError("egd_map: alpha must be finite and > 0");
  if (distance.min() < 0.0) throw ContractError("egd_map: negative distances");
  ScalarMap out(distance.height(), distance.width());
  auto dst = out.mutable_values();
  const auto src = distance.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::exp(-alpha * src[i]);
  return out;
}

PseudoLabel build_spl(const ScalarMap& image, const SeedSet& seeds, const GeodesicConfig& config) {
  if (seeds.foreground.empty() || seeds.background.empty()) {
    throw ContractError("build_spl: both seed lists must be non-empty");
  }
  auto background = egd_map(geodesic_distance(image, seeds.background, config), config.alpha);
  auto foreground = egd_map(geodesic_distance(image, seeds.foreground, config), config.alpha);
  return {std::move(background), std::move(foreground)};
}

ScalarMap spl_to_soft_target(const PseudoLabel& label) {
  if (label.foreground.shape() != label.background.shape()) {
    throw ContractError("spl_to_soft_target: cue map shapes differ");
  }
  ScalarMap out(label.foreground.height(), label.foreground.width());
  auto dst = out.mutable_values();
  const auto f = label.foreground.values();
  const auto b = label.background.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double den = f[i] + b[i];
    // Both cues underflow only for astronomically distant pixels; call those undecided.
    dst[i] = den > 0.0 ? f[i] / den : 0.5;
  }
  return out;
}

}  // namespace umcam::geo
