#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace umcam::io {

enum class SliceLabel { positive, negative };

/// One tap of the classifier: a features file and a gradients file.
struct FeatureExportRef {
  int block = 0;
  std::filesystem::path features;
  std::filesystem::path gradients;
  double class_score = 0.0;
};

struct ManifestEntry {
  std::string slice_id;
  std::string volume_id;
  std::filesystem::path image_path;
  SliceLabel label = SliceLabel::negative;
  std::optional<std::filesystem::path> ground_truth_path;
  /// Sorted by block index after loading.
  std::vector<FeatureExportRef> feature_exports;
  /// Free-form split tag ("train", "val", "test"); empty when absent.
  std::string split;

  bool positive() const { return label == SliceLabel::positive; }
};

/// Dataset manifest. Every path is resolved against the manifest's directory
/// on load, so entries hold paths usable as-is.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& slice_id) const;
};

enum class ManifestUse {
  general,
  /// Positive entries must carry a ground_truth_path.
  evaluation,
};

/// Loads and validates a JSON manifest. Throws SchemaError on schema
/// violations and duplicate slice ids, IoError if unreadable.
DatasetManifest load_manifest(const std::filesystem::path& path, ManifestUse use = ManifestUse::general);

/// Parses a manifest from JSON text; relative paths resolve against `base_dir`.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               ManifestUse use = ManifestUse::general);

/// Serializes with paths relative to `base_dir` when they lie beneath it.
std::string dump_manifest(const DatasetManifest& manifest);

}  // namespace umcam::io
