#pragma once

// File-driven pipeline behind the `umcam` command-line tool.
//
// Output layout under PipelineConfig::out:
//   fused/<slice>.npy          fused CAM for the configured fusion mode
//   gradcam/<slice>.npy        last-block Grad-CAM baseline
//   threshold.json             grid-searched binarisation threshold
//   spl/<slice>_{fg,bg,soft}.npy  cue maps and soft foreground target
//   targets/<slice>.npy        supervision target for the supervision mode
//   spl_report.json            processed / skipped / failed slices
//   eval_report.json           metrics report

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "umcam/cam_fusion.hpp"
#include "umcam/geodesic.hpp"
#include "umcam/loss.hpp"
#include "umcam/manifest.hpp"
#include "umcam/metrics.hpp"

namespace umcam::pipeline {

enum class SupervisionMode { grad_cam_only, um_cam, spl, um_cam_plus_spl };
enum class NegativePolicy { all_background, skip };

SupervisionMode parse_supervision_mode(std::string_view text);
std::string_view to_string(SupervisionMode mode);
NegativePolicy parse_negative_policy(std::string_view text);
metrics::EvalMode parse_eval_mode(std::string_view text);

struct PipelineConfig {
  cam::FusionConfig fusion;
  geo::GeodesicConfig geodesic;
  loss::LossConfig loss;
  SupervisionMode supervision = SupervisionMode::um_cam_plus_spl;
  NegativePolicy negatives = NegativePolicy::all_background;
  /// Overrides the grid-searched threshold when set.
  std::optional<double> threshold;
  /// Binarisation threshold applied to prediction maps in eval.
  double prediction_threshold = 0.5;
  metrics::EvalMode eval_mode = metrics::EvalMode::per_slice_2d;
  metrics::Spacing2D spacing_2d;
  metrics::Spacing3D spacing_3d;
  int workers = 1;
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::uint64_t seed = 42;
  int count = 20;

  /// Throws ConfigError.
  void validate() const;
};

/// Applies a JSON config document on top of `base`. Relative paths resolve
/// against `base_dir`. Throws ConfigError.
PipelineConfig apply_config_json(const std::string& text, const std::filesystem::path& base_dir,
                                 PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

struct SliceIssue {
  std::string slice_id;
  std::string message;
};

struct RunSummary {
  std::vector<std::string> processed;
  std::vector<SliceIssue> skipped;
  std::vector<SliceIssue> failures;

  /// 0 when every slice succeeded, 1 on any per-slice failure.
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Computes fused and baseline CAMs for every positive slice and grid-searches
/// the threshold on the validation subset (entries tagged split "val", or
/// every positive entry with ground truth when none is tagged).
RunSummary run_fuse(const io::DatasetManifest& manifest, const PipelineConfig& config);

/// Binarises the fused CAMs, extracts seeds, and writes cue maps, soft
/// targets and supervision targets. Needs run_fuse output (or an explicit
/// threshold plus fused maps) under `config.out`.
RunSummary run_spl(const io::DatasetManifest& manifest, const PipelineConfig& config);

/// The supervision target for one slice: the minimiser of the joint
/// cross-entropy objective, lambda * P_UM + (1 - lambda) * q for the combined
/// mode, since cross-entropy is linear in its target.
ScalarMap supervision_target(SupervisionMode mode, const ScalarMap& grad_cam, const ScalarMap& um_cam,
                             const std::optional<ScalarMap>& spl_soft, double lambda);

struct EvalOutcome {
  metrics::EvalReport report;
  RunSummary summary;
};

/// Evaluates `<predictions_dir>/<slice_id>.npy` against ground truth.
/// Writes eval_report.json under `config.out` when it is set.
EvalOutcome run_eval(const io::DatasetManifest& manifest, const std::filesystem::path& predictions_dir,
                     const PipelineConfig& config);

struct LossTriple {
  std::filesystem::path prediction;
  std::filesystem::path um_cam;
  std::filesystem::path spl_target;
};

struct LossRow {
  LossTriple files;
  loss::JointLoss loss;
};

std::vector<LossRow> run_loss_eval(const std::vector<LossTriple>& triples, const PipelineConfig& config);
std::string loss_report_json(const std::vector<LossRow>& rows, const PipelineConfig& config);

/// Path helpers for the output layout.
std::filesystem::path fused_path(const std::filesystem::path& out, const std::string& slice_id);
std::filesystem::path gradcam_path(const std::filesystem::path& out, const std::string& slice_id);
std::filesystem::path target_path(const std::filesystem::path& out, const std::string& slice_id);
std::filesystem::path soft_path(const std::filesystem::path& out, const std::string& slice_id);

}  // namespace umcam::pipeline
