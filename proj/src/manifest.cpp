#include "umcam/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "umcam/error.hpp"

namespace umcam::io {
namespace {

using nlohmann::json;

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ctx + ": missing required field '" + key + "'");
  if (!it->is_string()) throw SchemaError(ctx + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

std::filesystem::path resolve_path(const std::string& raw, const std::filesystem::path& base, const std::string& ctx,
                                   const char* key) {
  if (raw.empty() || raw.find('\0') != std::string::npos) {
    throw SchemaError(ctx + ": field '" + key + "' is not a valid path");
  }
  std::filesystem::path p(raw);
  return p.is_absolute() ? p : base / p;
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (base.empty()) return p.generic_string();
  auto rel = p.lexically_relative(base);
  if (rel.empty() || rel.begin()->string() == "..") return p.generic_string();
  return rel.generic_string();
}

}  // namespace

const ManifestEntry* DatasetManifest::find(const std::string& slice_id) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.slice_id == slice_id; });
  return it == entries.end() ? nullptr : &*it;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir, ManifestUse use) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("manifest root must be an object");
  auto entries_it = doc.find("entries");
  if (entries_it == doc.end() || !entries_it->is_array()) {
    throw SchemaError("manifest must contain an 'entries' array");
  }

  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& raw : *entries_it) {
    const std::string ctx = "manifest entry " + std::to_string(index++);
    if (!raw.is_object()) throw SchemaError(ctx + ": must be an object");

    ManifestEntry e;
    e.slice_id = require_string(raw, "slice_id", ctx);
    if (e.slice_id.empty()) throw SchemaError(ctx + ": empty slice_id");
    if (!seen.insert(e.slice_id).second) throw SchemaError(ctx + ": duplicate slice_id '" + e.slice_id + "'");
    const std::string sctx = ctx + " ('" + e.slice_id + "')";

    e.volume_id = require_string(raw, "volume_id", sctx);
    e.image_path = resolve_path(require_string(raw, "image_path", sctx), base_dir, sctx, "image_path");
    const auto label = require_string(raw, "label", sctx);
    if (label == "positive") {
      e.label = SliceLabel::positive;
    } else if (label == "negative") {
      e.label = SliceLabel::negative;
    } else {
      throw SchemaError(sctx + ": label must be 'positive' or 'negative', got '" + label + "'");
    }
    if (raw.contains("ground_truth_path") && !raw["ground_truth_path"].is_null()) {
      e.ground_truth_path =
          resolve_path(require_string(raw, "ground_truth_path", sctx), base_dir, sctx, "ground_truth_path");
    }
    if (raw.contains("split")) e.split = require_string(raw, "split", sctx);

    if (raw.contains("feature_export_paths")) {
      const auto& exports = raw["feature_export_paths"];
      if (!exports.is_array()) throw SchemaError(sctx + ": 'feature_export_paths' must be an array");
      std::set<int> blocks;
      for (const auto& x : exports) {
        if (!x.is_object()) throw SchemaError(sctx + ": feature export must be an object");
        FeatureExportRef ref;
        auto b = x.find("block");
        if (b == x.end() || !b->is_number_integer() || b->get<int>() < 0) {
          throw SchemaError(sctx + ": feature export needs a non-negative integer 'block'");
        }
        ref.block = b->get<int>();
        if (!blocks.insert(ref.block).second) {
          throw SchemaError(sctx + ": duplicate feature export block " + std::to_string(ref.block));
        }
        ref.features = resolve_path(require_string(x, "features", sctx), base_dir, sctx, "features");
        ref.gradients = resolve_path(require_string(x, "gradients", sctx), base_dir, sctx, "gradients");
        if (x.contains("class_score")) {
          if (!x["class_score"].is_number()) throw SchemaError(sctx + ": 'class_score' must be a number");
          ref.class_score = x["class_score"].get<double>();
        }
        e.feature_exports.push_back(std::move(ref));
      }
      std::sort(e.feature_exports.begin(), e.feature_exports.end(),
                [](const auto& a, const auto& b) { return a.block < b.block; });
    }

    if (use == ManifestUse::evaluation && e.positive() && !e.ground_truth_path) {
      throw SchemaError(sctx + ": positive entry used for evaluation has no ground_truth_path");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, ManifestUse use) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), use);
}

std::string dump_manifest(const DatasetManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json j;
    j["slice_id"] = e.slice_id;
    j["volume_id"] = e.volume_id;
    j["image_path"] = relative_to(e.image_path, manifest.base_dir);
    j["label"] = e.positive() ? "positive" : "negative";
    if (e.ground_truth_path) j["ground_truth_path"] = relative_to(*e.ground_truth_path, manifest.base_dir);
    if (!e.split.empty()) j["split"] = e.split;
    if (!e.feature_exports.empty()) {
      json exports = json::array();
      for (const auto& x : e.feature_exports) {
        exports.push_back({{"block", x.block},
                           {"features", relative_to(x.features, manifest.base_dir)},
                           {"gradients", relative_to(x.gradients, manifest.base_dir)},
                           {"class_score", x.class_score}});
      }
      j["feature_export_paths"] = std::move(exports);
    }
    entries.push_back(std::move(j));
  }
  json doc{{"version", 1}, {"entries", std::move(entries)}};
  return doc.dump(2) + "\n";
}

}  // namespace umcam::io
