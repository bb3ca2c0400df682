#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "umcam/manifest.hpp"

namespace umcam::synth {

/// Knobs of the synthetic cohort. Defaults are what `umcam synth` uses.
struct SynthConfig {
  int image_size = 64;
  int slices_per_volume = 10;
  /// Highest block index; block m has resolution image_size / 2^m.
  int max_block = 4;
  int channels = 4;
  double background_intensity = 0.2;
  double brain_intensity = 0.8;
  double image_noise = 0.004;
  int clutter_blobs = 5;

  // Per-block channel weights (index = block, last entry reused for deeper
  // blocks). Shallow blocks respond to clutter and edges and carry noisier
  // evidence; deep blocks are clean but coarse.
  std::vector<double> clutter_gain{2.0, 1.6, 1.0, 0.3, 0.05};
  std::vector<double> edge_gain{0.1, 0.05, 0.0};
  std::vector<double> evidence_noise{0.1, 0.08, 0.05, 0.03, 0.02};
  double noise_channel_gain = -0.15;
  double gradient_jitter = 0.5;
};

/// Writes images/, masks/, exports/ and manifest.json under `out_dir` for
/// `count` slices. Output depends only on (seed, count, config).
io::DatasetManifest generate(const std::filesystem::path& out_dir, std::uint64_t seed, int count,
                             const SynthConfig& config = {});

}  // namespace umcam::synth
