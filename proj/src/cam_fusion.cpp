#include "umcam/cam_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "umcam/error.hpp"
#include "umcam/metrics.hpp"

namespace umcam::cam {
namespace {

void require_unit_interval(const ScalarMap& map, const char* op) {
  if (map.min() < 0.0 || map.max() > 1.0) throw ContractError(std::string(op) + ": values must lie in [0, 1]");
}

// Base-2 binary entropy with 0 log 0 = 0.
double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  const double q = 1.0 - p;
  if (q > 0.0) h -= q * std::log2(q);
  return h;
}

}  // namespace

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "um_cam") return FusionMode::um_cam;
  if (text == "average_cam") return FusionMode::average_cam;
  if (text == "last_layer_only") return FusionMode::last_layer_only;
  throw ContractError("unknown fusion mode '" + std::string(text) + "'");
}

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::um_cam:
      return "um_cam";
    case FusionMode::average_cam:
      return "average_cam";
    case FusionMode::last_layer_only:
      return "last_layer_only";
  }
  return "unknown";
}

void FusionConfig::validate() const {
  if (max_block < 0) throw ContractError("fusion: M must be >= 0");
}

ScalarMap grad_cam(const FeatureBlockExport& block) { return grad_cam(block, kernels::active()); }

ScalarMap grad_cam(const FeatureBlockExport& block, const kernels::KernelTable& k) {
  const auto n = static_cast<double>(block.shape().size());
  ScalarMap out(block.height(), block.width());
  auto acc = out.mutable_values();
  for (int c = 0; c < block.channels(); ++c) {
    const double alpha = k.sum(block.gradient(c)) / n;
    k.axpy(alpha, block.feature(c), acc);
  }
  k.relu(acc);
  return out;
}

ScalarMap upsample_bilinear(const ScalarMap& map, int target_height, int target_width) {
  if (target_height < 1 || target_width < 1) throw ContractError("upsample_bilinear: target extents must be >= 1");
  const int hs = map.height();
  const int ws = map.width();
  if (hs == target_height && ws == target_width) return map;

  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [](int src, int dst) {
    std::vector<Tap> t(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (int i = 0; i < dst; ++i) {
      const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
      const int lo = static_cast<int>(std::floor(s));
      t[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, src - 1), s - lo};
    }
    return t;
  };
  const auto rows = taps(hs, target_height);
  const auto cols = taps(ws, target_width);

  ScalarMap out(target_height, target_width);
  for (int r = 0; r < target_height; ++r) {
    const auto& tr = rows[static_cast<std::size_t>(r)];
    for (int c = 0; c < target_width; ++c) {
      const auto& tc = cols[static_cast<std::size_t>(c)];
      const double top = std::lerp(map(tr.lo, tc.lo), map(tr.lo, tc.hi), tc.frac);
      const double bottom = std::lerp(map(tr.hi, tc.lo), map(tr.hi, tc.hi), tc.frac);
      out.set(r, c, std::lerp(top, bottom, tr.frac));
    }
  }
  return out;
}

ScalarMap normalize_max(const ScalarMap& map) {
  if (map.min() < 0.0) throw ContractError("normalize_max: negative input values");
  const double peak = map.max();
  ScalarMap out = map;
  if (peak == 0.0) return out;
  kernels::active().divide(out.mutable_values(), peak);
  return out;
}

ScalarMap entropy_weight(const ScalarMap& map) {
  require_unit_interval(map, "entropy_weight");
  ScalarMap out(map.height(), map.width());
  auto dst = out.mutable_values();
  const auto src = map.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp(1.0 - binary_entropy(src[i]), 0.0, 1.0);
  return out;
}

CamStack::CamStack(std::vector<ScalarMap> maps) : maps_(std::move(maps)) {
  if (maps_.empty()) throw ContractError("CamStack: empty stack");
  const auto shape = maps_.front().shape();
  for (std::size_t m = 0; m < maps_.size(); ++m) {
    const auto& map = maps_[m];
    if (map.shape() != shape) throw ContractError("CamStack: mismatched map shapes at block " + std::to_string(m));
    require_unit_interval(map, "CamStack");
    const double peak = map.max();
    if (peak != 0.0 && peak != 1.0) {
      throw ContractError("CamStack: map " + std::to_string(m) + " is not max-normalised");
    }
  }
}

CamStack CamStack::from_exports(std::span<const FeatureBlockExport> exports, int height, int width) {
  if (exports.empty()) throw ContractError("CamStack: no feature exports");
  std::vector<const FeatureBlockExport*> ordered;
  for (const auto& e : exports) {
    if (e.height() > height || e.width() > width) {
      throw ContractError("block " + std::to_string(e.block_index()) + " resolution exceeds the image resolution");
    }
    ordered.push_back(&e);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->block_index() < b->block_index(); });
  std::vector<ScalarMap> maps;
  maps.reserve(ordered.size());
  for (const auto* e : ordered) maps.push_back(normalize_max(upsample_bilinear(grad_cam(*e), height, width)));
  return CamStack(std::move(maps));
}

ScalarMap fuse(const CamStack& stack, const FusionConfig& config) {
  config.validate();
  if (stack.size() != static_cast<std::size_t>(config.max_block) + 1) {
    throw ContractError("fuse: stack holds " + std::to_string(stack.size()) + " maps, expected M + 1 = " +
                        std::to_string(config.max_block + 1));
  }
  if (config.mode == FusionMode::last_layer_only) return stack[stack.size() - 1];

  const auto& k = kernels::active();
  const auto shape = stack.shape();
  const std::size_t n = shape.size();
  std::vector<double> plain(n, 0.0), num(n, 0.0), den(n, 0.0);
  std::vector<double> lo(stack[0].values().begin(), stack[0].values().end());
  std::vector<double> hi = lo;
  const std::vector<double> ones(n, 1.0);
  for (const auto& map : stack.maps()) {
    const auto a = map.values();
    k.axpy(1.0, a, plain);
    if (config.mode == FusionMode::um_cam) {
      const auto w = entropy_weight(map);
      k.weighted_accumulate(w.values(), a, num, den);
    }
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], a[i]);
      hi[i] = std::max(hi[i], a[i]);
    }
  }

  ScalarMap out(shape.height, shape.width);
  auto dst = out.mutable_values();
  const auto count = static_cast<double>(stack.size());
  if (config.mode == FusionMode::um_cam) {
    k.fuse_finalize(num, den, plain, count, dst);
  } else {
    std::copy(plain.begin(), plain.end(), dst.begin());
    k.divide(dst, count);
  }
  // The quotient is a convex combination; pin rounding to the input range.
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::clamp(dst[i], lo[i], hi[i]);
  return out;
}

BinaryMask binarize(const ScalarMap& map, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("binarize: threshold must lie in [0, 1]");
  require_unit_interval(map, "binarize");
  std::vector<std::uint8_t> v(map.size());
  const auto src = map.values();
  for (std::size_t i = 0; i < src.size(); ++i) v[i] = src[i] > threshold ? 1 : 0;
  return BinaryMask(map.height(), map.width(), std::move(v));
}

std::vector<double> threshold_grid() {
  std::vector<double> g;
  for (int t = 0; t < 100; ++t) g.push_back(t / 100.0);
  return g;
}

ThresholdChoice grid_search_threshold(std::span<const ScalarMap> maps, std::span<const BinaryMask> truths) {
  if (maps.empty() || truths.empty()) throw ContractError("grid_search_threshold: empty lists");
  if (maps.size() != truths.size()) throw ContractError("grid_search_threshold: list lengths differ");
  bool any_truth = false;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].shape() != truths[i].shape()) throw ContractError("grid_search_threshold: shape mismatch");
    any_truth = any_truth || !truths[i].empty();
  }
  if (!any_truth) throw ContractError("grid_search_threshold: every ground truth is empty");

  ThresholdChoice best{0.0, -1.0};
  for (double t : threshold_grid()) {
    double total = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) total += metrics::dsc(binarize(maps[i], t), truths[i]);
    const double mean = total / static_cast<double>(maps.size());
    if (mean > best.mean_dsc) best = {t, mean};
  }
  return best;
}

}  // namespace umcam::cam
