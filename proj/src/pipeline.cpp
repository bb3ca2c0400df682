#include "umcam/pipeline.hpp"

#include <atomic>
#include <set>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "umcam/error.hpp"
#include "umcam/npy.hpp"

namespace umcam::pipeline {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(threads, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  }
}

// Values exactly as they come back from a float32 file.
ScalarMap as_stored(const ScalarMap& map) {
  std::vector<double> v(map.values().begin(), map.values().end());
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
  return ScalarMap(map.height(), map.width(), std::move(v));
}

void write_json(const fs::path& path, const json& doc) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

json issues_json(const std::vector<SliceIssue>& issues) {
  json arr = json::array();
  for (const auto& i : issues) arr.push_back({{"slice_id", i.slice_id}, {"message", i.message}});
  return arr;
}

std::vector<const io::ManifestEntry*> positives(const io::DatasetManifest& manifest) {
  std::vector<const io::ManifestEntry*> out;
  for (const auto& e : manifest.entries) {
    if (e.positive()) out.push_back(&e);
  }
  return out;
}

// Per-slice outcome slots, filled concurrently and folded in manifest order.
struct SliceOutcome {
  enum class Kind { none, processed, skipped, failed } kind = Kind::none;
  std::string message;
};

RunSummary fold(const std::vector<const io::ManifestEntry*>& entries, const std::vector<SliceOutcome>& outcomes) {
  RunSummary s;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& o = outcomes[i];
    switch (o.kind) {
      case SliceOutcome::Kind::processed:
        s.processed.push_back(entries[i]->slice_id);
        break;
      case SliceOutcome::Kind::skipped:
        s.skipped.push_back({entries[i]->slice_id, o.message});
        break;
      case SliceOutcome::Kind::failed:
        s.failures.push_back({entries[i]->slice_id, o.message});
        break;
      case SliceOutcome::Kind::none:
        break;
    }
  }
  return s;
}

double read_threshold(const PipelineConfig& config) {
  if (config.threshold) return *config.threshold;
  const auto path = config.out / "threshold.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("no --threshold given and '" + path.string() + "' is missing; run fuse first");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
  if (!doc.contains("threshold") || !doc["threshold"].is_number()) {
    throw ConfigError("'" + path.string() + "' holds no threshold (no validation ground truth); pass --threshold");
  }
  return doc["threshold"].get<double>();
}

}  // namespace

SupervisionMode parse_supervision_mode(std::string_view text) {
  if (text == "grad_cam_only") return SupervisionMode::grad_cam_only;
  if (text == "um_cam") return SupervisionMode::um_cam;
  if (text == "spl") return SupervisionMode::spl;
  if (text == "um_cam_plus_spl") return SupervisionMode::um_cam_plus_spl;
  throw ConfigError("unknown supervision mode '" + std::string(text) + "'");
}

std::string_view to_string(SupervisionMode mode) {
  switch (mode) {
    case SupervisionMode::grad_cam_only:
      return "grad_cam_only";
    case SupervisionMode::um_cam:
      return "um_cam";
    case SupervisionMode::spl:
      return "spl";
    case SupervisionMode::um_cam_plus_spl:
      return "um_cam_plus_spl";
  }
  return "unknown";
}

NegativePolicy parse_negative_policy(std::string_view text) {
  if (text == "all_background") return NegativePolicy::all_background;
  if (text == "skip") return NegativePolicy::skip;
  throw ConfigError("unknown negative slice policy '" + std::string(text) + "'");
}

metrics::EvalMode parse_eval_mode(std::string_view text) {
  if (text == "per_slice_2d") return metrics::EvalMode::per_slice_2d;
  if (text == "per_volume_3d") return metrics::EvalMode::per_volume_3d;
  throw ConfigError("unknown eval mode '" + std::string(text) + "'");
}

void PipelineConfig::validate() const {
  try {
    fusion.validate();
    geodesic.validate();
    loss.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  if (!(prediction_threshold >= 0.0 && prediction_threshold <= 1.0)) {
    throw ConfigError("prediction_threshold must lie in [0, 1]");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (count < 1) throw ConfigError("count must be >= 1");
  for (double s : {spacing_2d.row, spacing_2d.col, spacing_3d.slice, spacing_3d.row, spacing_3d.col}) {
    if (!(s > 0.0)) throw ConfigError("spacing must be positive");
  }
}

PipelineConfig apply_config_json(const std::string& text, const fs::path& base_dir, PipelineConfig cfg) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  auto path_of = [&](const json& v) {
    fs::path p(v.get<std::string>());
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    if (auto f = doc.find("fusion"); f != doc.end()) {
      if (f->contains("M")) cfg.fusion.max_block = f->at("M").get<int>();
      if (f->contains("mode")) cfg.fusion.mode = cam::parse_fusion_mode(f->at("mode").get<std::string>());
    }
    if (auto g = doc.find("geodesic"); g != doc.end()) {
      if (g->contains("alpha")) cfg.geodesic.alpha = g->at("alpha").get<double>();
      if (g->contains("connectivity")) {
        const int c = g->at("connectivity").get<int>();
        if (c != 4 && c != 8) throw ConfigError("connectivity must be 4 or 8");
        cfg.geodesic.connectivity = c == 4 ? geo::Connectivity::four : geo::Connectivity::eight;
      }
      if (g->contains("solver")) cfg.geodesic.solver = geo::parse_solver(g->at("solver").get<std::string>());
      if (g->contains("raster_passes")) cfg.geodesic.raster_passes = g->at("raster_passes").get<int>();
      if (g->contains("bbox_margin")) cfg.geodesic.bbox_margin = g->at("bbox_margin").get<int>();
    }
    if (auto l = doc.find("loss"); l != doc.end()) {
      if (l->contains("lambda")) cfg.loss.lambda = l->at("lambda").get<double>();
      if (l->contains("epsilon")) cfg.loss.epsilon = l->at("epsilon").get<double>();
    }
    if (doc.contains("supervision_mode")) {
      cfg.supervision = parse_supervision_mode(doc["supervision_mode"].get<std::string>());
    }
    if (doc.contains("negative_slice_policy")) {
      cfg.negatives = parse_negative_policy(doc["negative_slice_policy"].get<std::string>());
    }
    if (doc.contains("threshold") && !doc["threshold"].is_null()) cfg.threshold = doc["threshold"].get<double>();
    if (doc.contains("prediction_threshold")) cfg.prediction_threshold = doc["prediction_threshold"].get<double>();
    if (doc.contains("eval_mode")) cfg.eval_mode = parse_eval_mode(doc["eval_mode"].get<std::string>());
    if (doc.contains("spacing")) {
      const auto s = doc["spacing"].get<std::vector<double>>();
      if (s.size() != 3) throw ConfigError("spacing must be [slice, row, col]");
      cfg.spacing_3d = {s[0], s[1], s[2]};
      cfg.spacing_2d = {s[1], s[2]};
    }
    if (doc.contains("workers")) cfg.workers = doc["workers"].get<int>();
    if (doc.contains("manifest")) cfg.manifest = path_of(doc["manifest"]);
    if (doc.contains("out")) cfg.out = path_of(doc["out"]);
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("count")) cfg.count = doc["count"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_config_json(ss.str(), path.parent_path(), std::move(base));
}

fs::path fused_path(const fs::path& out, const std::string& id) { return out / "fused" / (id + ".npy"); }
fs::path gradcam_path(const fs::path& out, const std::string& id) { return out / "gradcam" / (id + ".npy"); }
fs::path target_path(const fs::path& out, const std::string& id) { return out / "targets" / (id + ".npy"); }
fs::path soft_path(const fs::path& out, const std::string& id) { return out / "spl" / (id + "_soft.npy"); }

RunSummary run_fuse(const io::DatasetManifest& manifest, const PipelineConfig& config) {
  config.validate();
  const auto entries = positives(manifest);
  const int expected = config.fusion.max_block + 1;

  bool tagged = false;
  for (const auto* e : entries) tagged = tagged || e->split == "val";
  auto in_validation = [&](const io::ManifestEntry& e) {
    return e.ground_truth_path.has_value() && (!tagged || e.split == "val");
  };

  std::vector<SliceOutcome> outcomes(entries.size());
  std::vector<std::optional<ScalarMap>> fused(entries.size()), baseline(entries.size());
  std::vector<std::optional<BinaryMask>> truths(entries.size());
  parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    const auto& e = *entries[i];
    try {
      if (static_cast<int>(e.feature_exports.size()) != expected) {
        throw ContractError("expected " + std::to_string(expected) + " feature exports (M + 1), found " +
                            std::to_string(e.feature_exports.size()));
      }
      const auto image = io::read_map(e.image_path);
      std::vector<FeatureBlockExport> exports;
      for (const auto& ref : e.feature_exports) {
        exports.push_back(io::read_feature_export(ref.features, ref.gradients, ref.block, ref.class_score));
      }
      const auto stack = cam::CamStack::from_exports(exports, image.height(), image.width());
      auto f = as_stored(cam::fuse(stack, config.fusion));
      auto b = as_stored(stack[stack.size() - 1]);
      io::write_map(f, fused_path(config.out, e.slice_id));
      io::write_map(b, gradcam_path(config.out, e.slice_id));
      if (in_validation(e)) {
        auto truth = io::read_mask(*e.ground_truth_path);
        if (truth.shape() != image.shape()) throw ContractError("ground truth shape differs from the image");
        truths[i] = std::move(truth);
        fused[i] = std::move(f);
        baseline[i] = std::move(b);
      }
      outcomes[i].kind = SliceOutcome::Kind::processed;
    } catch (const std::exception& ex) {
      outcomes[i] = {SliceOutcome::Kind::failed, ex.what()};
    }
  });

  std::vector<ScalarMap> val_fused, val_base;
  std::vector<BinaryMask> val_truth;
  json validation = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!truths[i]) continue;
    val_fused.push_back(*fused[i]);
    val_base.push_back(*baseline[i]);
    val_truth.push_back(*truths[i]);
    validation.push_back(entries[i]->slice_id);
  }

  auto summary = fold(entries, outcomes);
  json doc{{"fusion_mode", cam::to_string(config.fusion.mode)},
           {"M", config.fusion.max_block},
           {"validation_slices", validation},
           {"processed", summary.processed.size()},
           {"failed_slices", issues_json(summary.failures)}};
  std::optional<cam::ThresholdChoice> searched;
  bool any_truth = false;
  for (const auto& t : val_truth) any_truth = any_truth || !t.empty();
  if (any_truth) {
    searched = cam::grid_search_threshold(val_fused, val_truth);
    const auto base = cam::grid_search_threshold(val_base, val_truth);
    doc["grid_search"] = {{"threshold", searched->threshold}, {"mean_dsc", searched->mean_dsc}};
    doc["baseline_grid_search"] = {{"threshold", base.threshold}, {"mean_dsc", base.mean_dsc}};
  }
  if (config.threshold) {
    doc["threshold"] = *config.threshold;
    doc["source"] = "override";
  } else if (searched) {
    doc["threshold"] = searched->threshold;
    doc["mean_dsc"] = searched->mean_dsc;
    doc["source"] = "grid_search";
  } else {
    doc["threshold"] = nullptr;
    doc["source"] = "none";
  }
  write_json(config.out / "threshold.json", doc);
  return summary;
}

ScalarMap supervision_target(SupervisionMode mode, const ScalarMap& grad_cam, const ScalarMap& um_cam,
                             const std::optional<ScalarMap>& spl_soft, double lambda) {
  switch (mode) {
    case SupervisionMode::grad_cam_only:
      return grad_cam;
    case SupervisionMode::um_cam:
      return um_cam;
    case SupervisionMode::spl:
      if (!spl_soft) throw ContractError("spl supervision needs a soft SPL target");
      return *spl_soft;
    case SupervisionMode::um_cam_plus_spl: {
      if (!spl_soft) throw ContractError("um_cam_plus_spl supervision needs a soft SPL target");
      if (spl_soft->shape() != um_cam.shape()) throw ContractError("target shapes differ");
      std::vector<double> v(um_cam.size());
      const auto a = um_cam.values();
      const auto b = spl_soft->values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = lambda * a[i] + (1.0 - lambda) * b[i];
      return ScalarMap(um_cam.height(), um_cam.width(), std::move(v));
    }
  }
  throw ContractError("unknown supervision mode");
}

RunSummary run_spl(const io::DatasetManifest& manifest, const PipelineConfig& config) {
  config.validate();
  const double threshold = read_threshold(config);
  const bool needs_spl =
      config.supervision == SupervisionMode::spl || config.supervision == SupervisionMode::um_cam_plus_spl;

  std::vector<const io::ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (e.positive() || config.negatives == NegativePolicy::all_background) entries.push_back(&e);
  }
  std::vector<SliceOutcome> outcomes(entries.size());
  std::vector<std::optional<geo::SeedSet>> seeds(entries.size());
  parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    const auto& e = *entries[i];
    try {
      const auto image = io::read_map(e.image_path);
      if (!e.positive()) {
        const ScalarMap empty(image.height(), image.width());
        io::write_map(empty, soft_path(config.out, e.slice_id));
        io::write_map(empty, target_path(config.out, e.slice_id));
        outcomes[i].kind = SliceOutcome::Kind::processed;
        return;
      }
      const auto um = io::read_map(fused_path(config.out, e.slice_id));
      if (um.shape() != image.shape()) throw ContractError("fused map shape differs from the image");
      std::optional<ScalarMap> gc;
      if (config.supervision == SupervisionMode::grad_cam_only) gc = io::read_map(gradcam_path(config.out, e.slice_id));

      std::optional<ScalarMap> soft;
      std::string skip_reason;
      const auto mask = cam::binarize(um, threshold);
      if (mask.empty()) {
        skip_reason = "empty binarized mask";
      } else {
        try {
          seeds[i] = geo::extract_seeds(mask, config.geodesic);
        } catch (const ContractError& ex) {
          skip_reason = ex.what();
        }
      }
      if (seeds[i]) {
        const auto label = geo::build_spl(image, *seeds[i], config.geodesic);
        soft = as_stored(geo::spl_to_soft_target(label));
        io::write_map(label.foreground, config.out / "spl" / (e.slice_id + "_fg.npy"));
        io::write_map(label.background, config.out / "spl" / (e.slice_id + "_bg.npy"));
        io::write_map(*soft, soft_path(config.out, e.slice_id));
      }
      if (soft || !needs_spl) {
        const auto target =
            supervision_target(config.supervision, gc ? *gc : um, um, soft, config.loss.lambda);
        io::write_map(target, target_path(config.out, e.slice_id));
      }
      if (skip_reason.empty()) {
        outcomes[i].kind = SliceOutcome::Kind::processed;
      } else {
        outcomes[i] = {SliceOutcome::Kind::skipped, skip_reason};
      }
    } catch (const std::exception& ex) {
      outcomes[i] = {SliceOutcome::Kind::failed, ex.what()};
    }
  });

  auto summary = fold(entries, outcomes);
  json seed_doc = json::object();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!seeds[i]) continue;
    auto pts = [](const std::vector<Pixel>& v) {
      json a = json::array();
      for (const auto& p : v) a.push_back({p.row, p.col});
      return a;
    };
    seed_doc[entries[i]->slice_id] = {{"foreground", pts(seeds[i]->foreground)},
                                      {"background", pts(seeds[i]->background)}};
  }
  json doc{{"threshold", threshold},
           {"supervision_mode", to_string(config.supervision)},
           {"lambda", config.loss.lambda},
           {"alpha", config.geodesic.alpha},
           {"processed", summary.processed},
           {"skipped_slices", issues_json(summary.skipped)},
           {"failed_slices", issues_json(summary.failures)},
           {"seeds", seed_doc}};
  write_json(config.out / "spl_report.json", doc);
  return summary;
}

EvalOutcome run_eval(const io::DatasetManifest& manifest, const fs::path& predictions_dir,
                     const PipelineConfig& config) {
  config.validate();
  const bool volumetric = config.eval_mode == metrics::EvalMode::per_volume_3d;
  std::vector<const io::ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (e.positive() && !e.ground_truth_path) {
      throw SchemaError("slice '" + e.slice_id + "': positive entry used for evaluation has no ground_truth_path");
    }
    if (volumetric || e.positive()) entries.push_back(&e);
  }

  std::vector<SliceOutcome> outcomes(entries.size());
  std::vector<std::optional<metrics::CohortItem>> items(entries.size());
  parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    const auto& e = *entries[i];
    try {
      const auto pred_file = predictions_dir / (e.slice_id + ".npy");
      if (!fs::exists(pred_file)) throw IoError("missing prediction file '" + pred_file.string() + "'");
      const auto pred = cam::binarize(io::read_map(pred_file), config.prediction_threshold);
      BinaryMask truth = e.ground_truth_path ? io::read_mask(*e.ground_truth_path)
                                             : BinaryMask(pred.height(), pred.width());
      if (truth.shape() != pred.shape()) throw ContractError("prediction shape differs from ground truth");
      items[i] = metrics::CohortItem{e.slice_id, e.volume_id, pred, std::move(truth)};
      outcomes[i].kind = SliceOutcome::Kind::processed;
    } catch (const std::exception& ex) {
      outcomes[i] = {SliceOutcome::Kind::failed, ex.what()};
    }
  });

  EvalOutcome result;
  result.summary = fold(entries, outcomes);
  std::vector<metrics::CohortItem> usable;
  if (volumetric) {
    // A volume with any failed slice cannot be stacked.
    std::set<std::string> broken;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!items[i]) broken.insert(entries[i]->volume_id);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (items[i] && !broken.contains(entries[i]->volume_id)) usable.push_back(*items[i]);
    }
  } else {
    for (auto& it : items) {
      if (it) usable.push_back(std::move(*it));
    }
  }
  if (usable.empty()) throw ConfigError("nothing to evaluate: no prediction could be paired with ground truth");
  result.report = metrics::evaluate_cohort(usable, config.eval_mode, config.spacing_2d, config.spacing_3d);

  if (!config.out.empty()) {
    auto doc = json::parse(metrics::report_to_json(result.report));
    doc["failed_slices"] = issues_json(result.summary.failures);
    write_json(config.out / "eval_report.json", doc);
  }
  return result;
}

std::vector<LossRow> run_loss_eval(const std::vector<LossTriple>& triples, const PipelineConfig& config) {
  config.validate();
  std::vector<LossRow> rows;
  for (const auto& t : triples) {
    const auto pred = io::read_map(t.prediction);
    const auto um = io::read_map(t.um_cam);
    const auto spl = io::read_map(t.spl_target);
    rows.push_back({t, loss::joint_loss(pred, um, spl, config.loss)});
  }
  return rows;
}

std::string loss_report_json(const std::vector<LossRow>& rows, const PipelineConfig& config) {
  json arr = json::array();
  double total = 0.0;
  for (const auto& r : rows) {
    arr.push_back({{"prediction", r.files.prediction.string()},
                   {"um_cam", r.files.um_cam.string()},
                   {"spl_target", r.files.spl_target.string()},
                   {"total", r.loss.total},
                   {"ce_um", r.loss.ce_um},
                   {"ce_spl", r.loss.ce_spl}});
    total += r.loss.total;
  }
  json doc{{"lambda", config.loss.lambda}, {"epsilon", config.loss.epsilon}, {"rows", arr}};
  doc["mean_total"] = rows.empty() ? json(nullptr) : json(total / static_cast<double>(rows.size()));
  return doc.dump(2) + "\n";
}

}  // namespace umcam::pipeline
