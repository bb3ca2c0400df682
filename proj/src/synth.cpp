#include "umcam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "umcam/error.hpp"
#include "umcam/npy.hpp"

namespace umcam::synth {
namespace {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// uniform and normal variates are derived here by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

struct Blob {
  double row, col, sigma, amplitude;
};

struct Volume {
  double centre_row, centre_col;
  double axis_row, axis_col;
  double angle;
  std::vector<Blob> clutter;
};

double gain(const std::vector<double>& table, int block) {
  if (table.empty()) return 0.0;
  return table[std::min<std::size_t>(static_cast<std::size_t>(block), table.size() - 1)];
}

using Grid = std::vector<double>;

// Area average of a size x size grid into res x res cells.
Grid box_downsample(const Grid& src, int size, int res) {
  const int f = size / res;
  Grid out(static_cast<std::size_t>(res) * res, 0.0);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      out[static_cast<std::size_t>(r / f) * res + static_cast<std::size_t>(c / f)] +=
          src[static_cast<std::size_t>(r) * size + static_cast<std::size_t>(c)];
    }
  }
  const double inv = 1.0 / (f * f);
  for (auto& v : out) v *= inv;
  return out;
}

Grid gradient_magnitude(const Grid& img, int size) {
  Grid out(img.size(), 0.0);
  auto at = [&](int r, int c) {
    r = std::clamp(r, 0, size - 1);
    c = std::clamp(c, 0, size - 1);
    return img[static_cast<std::size_t>(r) * size + static_cast<std::size_t>(c)];
  };
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double gr = 0.5 * (at(r + 1, c) - at(r - 1, c));
      const double gc = 0.5 * (at(r, c + 1) - at(r, c - 1));
      out[static_cast<std::size_t>(r) * size + static_cast<std::size_t>(c)] = std::sqrt(gr * gr + gc * gc);
    }
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Volume make_volume(Rng& rng, const SynthConfig& cfg) {
  const double n = cfg.image_size;
  Volume v;
  v.centre_row = n * rng.uniform(0.4, 0.6);
  v.centre_col = n * rng.uniform(0.4, 0.6);
  v.axis_row = n * rng.uniform(0.17, 0.25);
  v.axis_col = n * rng.uniform(0.17, 0.25);
  v.angle = rng.uniform(0.0, std::numbers::pi);
  for (int i = 0; i < cfg.clutter_blobs; ++i) {
    v.clutter.push_back({n * rng.uniform(0.05, 0.95), n * rng.uniform(0.05, 0.95), n * rng.uniform(0.03, 0.06),
                         rng.uniform(0.15, 0.35)});
  }
  return v;
}

struct SliceData {
  Grid image;
  Grid soft;  // smooth brain occupancy in [0, 1]
  Grid clutter;
  std::vector<std::uint8_t> mask;
};

SliceData make_slice(Rng& rng, const SynthConfig& cfg, const Volume& vol, int z, bool positive) {
  const int n = cfg.image_size;
  const double half = 0.5 * cfg.slices_per_volume;
  const double t = (z - 0.5 * (cfg.slices_per_volume - 1)) / half;
  const double scale = std::sqrt(std::max(0.0, 1.0 - t * t));
  const double ar = vol.axis_row * scale;
  const double ac = vol.axis_col * scale;
  const double cr = vol.centre_row + rng.uniform(-1.0, 1.0);
  const double cc = vol.centre_col + rng.uniform(-1.0, 1.0);
  const double cs = std::cos(vol.angle), sn = std::sin(vol.angle);

  SliceData s;
  const std::size_t total = static_cast<std::size_t>(n) * n;
  s.image.assign(total, 0.0);
  s.soft.assign(total, 0.0);
  s.clutter.assign(total, 0.0);
  s.mask.assign(total, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c);
      double clutter = 0.0;
      for (const auto& b : vol.clutter) {
        const double dr = r - b.row, dc = c - b.col;
        clutter += b.amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * b.sigma * b.sigma));
      }
      s.clutter[i] = clutter;
      if (positive) {
        const double dr = r - cr, dc = c - cc;
        const double u = (cs * dr + sn * dc) / ar;
        const double w = (-sn * dr + cs * dc) / ac;
        const double rho = std::sqrt(u * u + w * w);
        s.mask[i] = rho < 1.0 ? 1 : 0;
        // Approximate signed distance to the rim, in pixels.
        s.soft[i] = sigmoid((1.0 - rho) * std::min(ar, ac) / 0.6);
      }
      s.image[i] = cfg.background_intensity + (cfg.brain_intensity - cfg.background_intensity) * s.soft[i] +
                   clutter * (1.0 - s.soft[i]) + cfg.image_noise * rng.normal();
    }
  }
  return s;
}

io::ChannelStack zero_mean_jitter(Rng& rng, const std::vector<double>& means, int res, double jitter) {
  const std::size_t plane = static_cast<std::size_t>(res) * res;
  io::ChannelStack g{static_cast<int>(means.size()), res, res, std::vector<double>(means.size() * plane)};
  for (std::size_t k = 0; k < means.size(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      g.values[k * plane + i] = jitter * rng.normal();
      mean += g.values[k * plane + i];
    }
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) g.values[k * plane + i] += means[k] - mean;
  }
  return g;
}

std::string slice_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04d", index);
  return buf;
}

}  // namespace

io::DatasetManifest generate(const std::filesystem::path& out_dir, std::uint64_t seed, int count,
                             const SynthConfig& cfg) {
  if (count < 1) throw ContractError("synth: count must be >= 1");
  if (cfg.image_size < 8 || cfg.slices_per_volume < 3 || cfg.channels < 4) {
    throw ContractError("synth: unsupported configuration");
  }
  if ((cfg.image_size >> cfg.max_block) < 1 || cfg.image_size % (1 << cfg.max_block) != 0) {
    throw ContractError("synth: image size must be divisible by 2^M");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("synth: cannot create '" + out_dir.string() + "': " + ec.message());

  Rng rng(seed);
  io::DatasetManifest manifest;
  manifest.base_dir = out_dir;
  const int n = cfg.image_size;
  Volume vol{};
  for (int index = 0; index < count; ++index) {
    const int z = index % cfg.slices_per_volume;
    const int volume_index = index / cfg.slices_per_volume;
    if (z == 0) vol = make_volume(rng, cfg);
    const bool positive = z != 0 && z != cfg.slices_per_volume - 1;
    const auto slice = make_slice(rng, cfg, vol, z, positive);

    io::ManifestEntry e;
    e.slice_id = slice_name(index);
    char vbuf[16];
    std::snprintf(vbuf, sizeof vbuf, "v%03d", volume_index);
    e.volume_id = vbuf;
    e.label = positive ? io::SliceLabel::positive : io::SliceLabel::negative;
    e.image_path = out_dir / "images" / (e.slice_id + ".npy");
    e.ground_truth_path = out_dir / "masks" / (e.slice_id + ".npy");
    io::write_map(ScalarMap(n, n, slice.image), e.image_path);
    io::write_mask(BinaryMask(n, n, slice.mask), *e.ground_truth_path);

    if (positive) {
      const auto edges = gradient_magnitude(slice.image, n);
      for (int m = 0; m <= cfg.max_block; ++m) {
        const int res = n >> m;
        const std::size_t plane = static_cast<std::size_t>(res) * res;
        const auto evidence = box_downsample(slice.soft, n, res);
        const auto clutter = box_downsample(slice.clutter, n, res);
        const auto edge = box_downsample(edges, n, res);

        io::ChannelStack f{cfg.channels, res, res, std::vector<double>(static_cast<std::size_t>(cfg.channels) * plane)};
        for (std::size_t i = 0; i < plane; ++i) {
          f.values[i] = evidence[i] * std::clamp(1.0 + gain(cfg.evidence_noise, m) * rng.normal(), 0.0, 1.0);
          f.values[plane + i] = clutter[i] / 0.35;
          f.values[2 * plane + i] = edge[i] / 0.1;
          f.values[3 * plane + i] = std::abs(rng.normal());
          for (int k = 4; k < cfg.channels; ++k) f.values[static_cast<std::size_t>(k) * plane + i] = 0.0;
        }
        std::vector<double> alphas{1.0, gain(cfg.clutter_gain, m), gain(cfg.edge_gain, m), cfg.noise_channel_gain};
        alphas.resize(static_cast<std::size_t>(cfg.channels), 0.0);
        const auto g = zero_mean_jitter(rng, alphas, res, cfg.gradient_jitter);

        io::FeatureExportRef ref;
        ref.block = m;
        const std::string stem = e.slice_id + "_b" + std::to_string(m);
        ref.features = out_dir / "exports" / (stem + "_features.npy");
        ref.gradients = out_dir / "exports" / (stem + "_gradients.npy");
        ref.class_score = 2.0;
        io::write_stack(f, ref.features);
        io::write_stack(g, ref.gradients);
        e.feature_exports.push_back(std::move(ref));
      }
    }
    manifest.entries.push_back(std::move(e));
  }

  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("synth: cannot write manifest in '" + out_dir.string() + "'");
  out << io::dump_manifest(manifest);
  return manifest;
}

}  // namespace umcam::synth
