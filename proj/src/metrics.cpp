#include "umcam/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "umcam/error.hpp"
#include "umcam/kernels.hpp"

namespace umcam::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense binary grid view with extents (depth, height, width).
struct Grid3 {
  std::span<const std::uint8_t> values;
  std::array<int, 3> dims;  // depth, height, width
  bool use_depth;           // false: depth is 1 and boundaries are in-plane only

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
};

std::vector<std::uint8_t> boundary_of(const Grid3& g) {
  const int D = g.dims[0], H = g.dims[1], W = g.dims[2];
  std::vector<std::uint8_t> out(g.size(), 0);
  auto at = [&](int z, int y, int x) {
    return g.values[(static_cast<std::size_t>(z) * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)];
  };
  for (int z = 0; z < D; ++z) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!at(z, y, x)) continue;
        bool edge = y == 0 || y == H - 1 || x == 0 || x == W - 1 || !at(z, y - 1, x) || !at(z, y + 1, x) ||
                    !at(z, y, x - 1) || !at(z, y, x + 1);
        if (!edge && g.use_depth) edge = z == 0 || z == D - 1 || !at(z - 1, y, x) || !at(z + 1, y, x);
        if (edge) out[(static_cast<std::size_t>(z) * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)] = 1;
      }
    }
  }
  return out;
}

// Felzenszwalb-Huttenlocher lower envelope along one line, sample positions
// i * step. `f` holds squared distances (inf where unknown) and is replaced.
void edt_line(std::vector<double>& f, double step, std::vector<int>& v, std::vector<double>& z,
              std::vector<double>& out) {
  const int n = static_cast<int>(f.size());
  auto pos = [step](int i) { return step * i; };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    const double fq = f[q] + pos(q) * pos(q);
    double s;
    while (true) {
      const int p = v[k];
      s = (fq - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[k] = q;  // k == 0: the new parabola dominates everywhere
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
    }
    z[k + 1] = kInf;
  }
  if (k < 0) return;  // no finite samples: line stays at inf
  int j = 0;
  for (int i = 0; i < n; ++i) {
    while (z[j + 1] < pos(i)) ++j;
    const double d = pos(i) - pos(v[j]);
    out[i] = d * d + f[v[j]];
  }
  f.swap(out);
}

// Squared Euclidean distance from every cell to the nearest set cell.
std::vector<double> squared_distance_to(const std::vector<std::uint8_t>& set, const std::array<int, 3>& dims,
                                        const std::array<double, 3>& spacing) {
  const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<double> dist(total);
  for (std::size_t i = 0; i < total; ++i) dist[i] = set[i] ? 0.0 : kInf;

  const std::array<std::size_t, 3> stride{static_cast<std::size_t>(dims[1]) * dims[2],
                                          static_cast<std::size_t>(dims[2]), 1};
  for (int axis = 2; axis >= 0; --axis) {
    const int n = dims[axis];
    if (n == 1) continue;
    std::vector<double> line(n), scratch(n), z(n + 1);
    std::vector<int> v(n);
    // Iterate over every line parallel to `axis`.
    for (std::size_t base = 0; base < total; ++base) {
      const std::size_t coord = (base / stride[axis]) % static_cast<std::size_t>(n);
      if (coord != 0) continue;
      for (int i = 0; i < n; ++i) line[i] = dist[base + i * stride[axis]];
      std::fill(scratch.begin(), scratch.end(), kInf);
      edt_line(line, spacing[axis], v, z, scratch);
      for (int i = 0; i < n; ++i) dist[base + i * stride[axis]] = line[i];
    }
  }
  return dist;
}

std::vector<double> pooled_distances(const Grid3& pred, const Grid3& truth, const std::array<double, 3>& spacing) {
  const auto bp = boundary_of(pred);
  const auto bt = boundary_of(truth);
  const bool any_p = std::find(bp.begin(), bp.end(), 1) != bp.end();
  const bool any_t = std::find(bt.begin(), bt.end(), 1) != bt.end();
  if (!any_p || !any_t) return {};

  const auto to_truth = squared_distance_to(bt, truth.dims, spacing);
  const auto to_pred = squared_distance_to(bp, pred.dims, spacing);
  std::vector<double> out;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    if (bp[i]) out.push_back(std::sqrt(to_truth[i]));
  }
  for (std::size_t i = 0; i < bt.size(); ++i) {
    if (bt[i]) out.push_back(std::sqrt(to_pred[i]));
  }
  return out;
}

double dsc_counts(std::size_t inter, std::size_t np, std::size_t nt) {
  if (np == 0 && nt == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + nt);
}

std::string format_hd(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

}  // namespace

MaskVolume::MaskVolume(std::span<const BinaryMask> slices) {
  if (slices.empty()) throw ContractError("MaskVolume needs at least one slice");
  depth_ = static_cast<int>(slices.size());
  height_ = slices.front().height();
  width_ = slices.front().width();
  values_.reserve(static_cast<std::size_t>(depth_) * slices.front().size());
  for (const auto& s : slices) {
    if (s.height() != height_ || s.width() != width_) {
      throw ContractError("inconsistent slice shapes within a volume");
    }
    values_.insert(values_.end(), s.values().begin(), s.values().end());
  }
}

std::size_t MaskVolume::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

double dsc(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.shape() != truth.shape()) throw ContractError("dsc: shape mismatch");
  const auto inter = kernels::active().count_both(pred.values(), truth.values());
  return dsc_counts(inter, pred.count(), truth.count());
}

double dsc(const MaskVolume& pred, const MaskVolume& truth) {
  if (pred.depth() != truth.depth() || pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ContractError("dsc: volume shape mismatch");
  }
  const auto inter = kernels::active().count_both(pred.values(), truth.values());
  return dsc_counts(inter, pred.count(), truth.count());
}

std::vector<double> boundary_distances(const BinaryMask& pred, const BinaryMask& truth, Spacing2D spacing) {
  if (pred.shape() != truth.shape()) throw ContractError("boundary_distances: shape mismatch");
  const std::array<int, 3> dims{1, pred.height(), pred.width()};
  return pooled_distances(Grid3{pred.values(), dims, false}, Grid3{truth.values(), dims, false},
                          {1.0, spacing.row, spacing.col});
}

std::vector<double> boundary_distances(const MaskVolume& pred, const MaskVolume& truth, Spacing3D spacing) {
  if (pred.depth() != truth.depth() || pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ContractError("boundary_distances: volume shape mismatch");
  }
  const std::array<int, 3> dims{pred.depth(), pred.height(), pred.width()};
  return pooled_distances(Grid3{pred.values(), dims, true}, Grid3{truth.values(), dims, true},
                          {spacing.slice, spacing.row, spacing.col});
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ContractError("percentile q must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& truth, Spacing2D spacing) {
  auto d = boundary_distances(pred, truth, spacing);
  if (d.empty()) return std::nullopt;
  return percentile(std::move(d), 95.0);
}

std::optional<double> hd95(const MaskVolume& pred, const MaskVolume& truth, Spacing3D spacing) {
  auto d = boundary_distances(pred, truth, spacing);
  if (d.empty()) return std::nullopt;
  return percentile(std::move(d), 95.0);
}

void aggregate(EvalReport& report) {
  auto mean_std = [](const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / static_cast<double>(xs.size()))};
  };
  std::vector<double> d, h;
  for (const auto& u : report.units) {
    d.push_back(u.dsc);
    if (u.hd95) h.push_back(*u.hd95);
  }
  report.mean_dsc = report.std_dsc = 0.0;
  report.mean_hd95.reset();
  report.std_hd95.reset();
  if (!d.empty()) std::tie(report.mean_dsc, report.std_dsc) = mean_std(d);
  if (!h.empty()) {
    auto [m, s] = mean_std(h);
    report.mean_hd95 = m;
    report.std_hd95 = s;
  }
}

EvalReport evaluate_cohort(std::span<const CohortItem> items, EvalMode mode, Spacing2D spacing_2d,
                           Spacing3D spacing_3d) {
  if (items.empty()) throw ContractError("evaluate_cohort: empty list");
  EvalReport report;
  report.mode = mode;
  if (mode == EvalMode::per_slice_2d) {
    for (const auto& it : items) {
      if (it.pred.shape() != it.truth.shape()) {
        throw ContractError("evaluate_cohort: prediction/truth shape mismatch for slice '" + it.slice_id + "'");
      }
      report.units.push_back({it.slice_id, dsc(it.pred, it.truth), hd95(it.pred, it.truth, spacing_2d)});
    }
  } else {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<BinaryMask>, std::vector<BinaryMask>>> volumes;
    for (const auto& it : items) {
      auto [pos, inserted] = volumes.try_emplace(it.volume_id);
      if (inserted) order.push_back(it.volume_id);
      pos->second.first.push_back(it.pred);
      pos->second.second.push_back(it.truth);
    }
    for (const auto& id : order) {
      const auto& [preds, truths] = volumes.at(id);
      try {
        const MaskVolume p(preds);
        const MaskVolume t(truths);
        if (p.height() != t.height() || p.width() != t.width()) {
          throw ContractError("prediction/truth shape mismatch");
        }
        report.units.push_back({id, dsc(p, t), hd95(p, t, spacing_3d)});
      } catch (const ContractError& e) {
        throw ContractError("evaluate_cohort: volume '" + id + "': " + e.what());
      }
    }
  }
  aggregate(report);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  json units = json::array();
  for (const auto& u : report.units) {
    units.push_back({{"unit_id", u.unit_id}, {"dsc", u.dsc}, {"hd95", u.hd95 ? json(*u.hd95) : json("undefined")}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json doc{{"mode", report.mode == EvalMode::per_slice_2d ? "per_slice_2d" : "per_volume_3d"},
           {"per_unit", std::move(units)},
           {"mean_dsc", report.mean_dsc},
           {"std_dsc", report.std_dsc},
           {"mean_hd95", opt(report.mean_hd95)},
           {"std_hd95", opt(report.std_hd95)}};
  return doc.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::size_t id_width = 9;
  for (const auto& u : report.units) id_width = std::max(id_width, u.unit_id.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %14s  %14s\n", static_cast<int>(id_width), "unit", "DSC (%)", "HD95");
  out += line;
  for (const auto& u : report.units) {
    std::snprintf(line, sizeof line, "%-*s  %14.2f  %14s\n", static_cast<int>(id_width), u.unit_id.c_str(),
                  100.0 * u.dsc, format_hd(u.hd95).c_str());
    out += line;
  }
  char dsc_cell[64];
  std::snprintf(dsc_cell, sizeof dsc_cell, "%.2f±%.2f", 100.0 * report.mean_dsc, 100.0 * report.std_dsc);
  std::string hd_cell = "undefined";
  if (report.mean_hd95) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f±%.2f", *report.mean_hd95, *report.std_hd95);
    hd_cell = buf;
  }
  std::snprintf(line, sizeof line, "%-*s  %15s  %15s\n", static_cast<int>(id_width), "mean±std", dsc_cell,
                hd_cell.c_str());
  out += line;
  return out;
}

}  // namespace umcam::metrics
