// umcam: fuse CAMs, build seed pseudo labels, evaluate masks, generate synthetic data.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "umcam/error.hpp"
#include "umcam/kernels.hpp"
#include "umcam/manifest.hpp"
#include "umcam/pipeline.hpp"
#include "umcam/synth.hpp"

namespace fs = std::filesystem;
using namespace umcam;

namespace {

struct Flags {
  std::string config, manifest, out, mode, predictions, solver, negatives;
  std::optional<double> threshold, alpha, lambda;
  std::optional<int> workers, count, passes, margin, connectivity, max_block;
  std::optional<std::uint64_t> seed;
  std::vector<double> spacing;
  std::vector<std::string> pred_files, um_files, spl_files;
};

void report(const char* stage, const pipeline::RunSummary& s) {
  std::cerr << stage << ": " << s.processed.size() << " processed, " << s.skipped.size() << " skipped, "
            << s.failures.size() << " failed\n";
  for (const auto& i : s.skipped) std::cerr << "  skipped " << i.slice_id << ": " << i.message << "\n";
  for (const auto& i : s.failures) std::cerr << "  failed " << i.slice_id << ": " << i.message << "\n";
}

pipeline::PipelineConfig resolve(const Flags& f, const std::string& command) {
  pipeline::PipelineConfig cfg;
  if (!f.config.empty()) cfg = pipeline::load_config(f.config);
  if (!f.manifest.empty()) cfg.manifest = f.manifest;
  if (!f.out.empty()) cfg.out = f.out;
  if (f.threshold) cfg.threshold = *f.threshold;
  if (f.alpha) cfg.geodesic.alpha = *f.alpha;
  if (f.lambda) cfg.loss.lambda = *f.lambda;
  if (f.workers) cfg.workers = *f.workers;
  if (f.seed) cfg.seed = *f.seed;
  if (f.count) cfg.count = *f.count;
  if (f.passes) cfg.geodesic.raster_passes = *f.passes;
  if (f.margin) cfg.geodesic.bbox_margin = *f.margin;
  if (f.max_block) cfg.fusion.max_block = *f.max_block;
  if (f.connectivity) {
    if (*f.connectivity != 4 && *f.connectivity != 8) throw ConfigError("--connectivity must be 4 or 8");
    cfg.geodesic.connectivity = *f.connectivity == 4 ? geo::Connectivity::four : geo::Connectivity::eight;
  }
  try {
    if (!f.solver.empty()) cfg.geodesic.solver = geo::parse_solver(f.solver);
    if (!f.mode.empty()) {
      if (command == "fuse") {
        cfg.fusion.mode = cam::parse_fusion_mode(f.mode);
      } else if (command == "spl") {
        cfg.supervision = pipeline::parse_supervision_mode(f.mode);
      } else if (command == "eval") {
        cfg.eval_mode = pipeline::parse_eval_mode(f.mode);
      } else {
        throw ConfigError("--mode is not used by '" + command + "'");
      }
    }
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (!f.negatives.empty()) cfg.negatives = pipeline::parse_negative_policy(f.negatives);
  if (!f.spacing.empty()) {
    if (f.spacing.size() != 3) throw ConfigError("--spacing takes slice row col");
    cfg.spacing_3d = {f.spacing[0], f.spacing[1], f.spacing[2]};
    cfg.spacing_2d = {f.spacing[1], f.spacing[2]};
  }
  cfg.validate();
  return cfg;
}

io::DatasetManifest open_manifest(const pipeline::PipelineConfig& cfg, io::ManifestUse use) {
  if (cfg.manifest.empty()) throw ConfigError("--manifest is required");
  try {
    return io::load_manifest(cfg.manifest, use);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void require_out(const pipeline::PipelineConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
}

int run(const std::string& command, const Flags& f) {
  const auto cfg = resolve(f, command);
  if (command == "synth") {
    require_out(cfg);
    const auto m = synth::generate(cfg.out, cfg.seed, cfg.count);
    std::cerr << "synth: wrote " << m.entries.size() << " slices to " << cfg.out.string() << "\n";
    return 0;
  }
  if (command == "fuse") {
    require_out(cfg);
    const auto s = pipeline::run_fuse(open_manifest(cfg, io::ManifestUse::general), cfg);
    report("fuse", s);
    return s.exit_code();
  }
  if (command == "spl") {
    require_out(cfg);
    const auto s = pipeline::run_spl(open_manifest(cfg, io::ManifestUse::general), cfg);
    report("spl", s);
    return s.exit_code();
  }
  if (command == "eval") {
    if (f.predictions.empty()) throw ConfigError("--predictions is required");
    const auto r = pipeline::run_eval(open_manifest(cfg, io::ManifestUse::evaluation), f.predictions, cfg);
    std::cout << metrics::report_to_table(r.report);
    report("eval", r.summary);
    return r.summary.exit_code();
  }
  if (command == "loss-eval") {
    if (f.pred_files.empty()) throw ConfigError("at least one --prediction is required");
    if (f.pred_files.size() != f.um_files.size() || f.pred_files.size() != f.spl_files.size()) {
      throw ConfigError("--prediction, --um-cam and --spl-target must be given the same number of times");
    }
    std::vector<pipeline::LossTriple> triples;
    for (std::size_t i = 0; i < f.pred_files.size(); ++i) {
      triples.push_back({f.pred_files[i], f.um_files[i], f.spl_files[i]});
    }
    const auto text = pipeline::loss_report_json(pipeline::run_loss_eval(triples, cfg), cfg);
    std::cout << text;
    if (!cfg.out.empty()) {
      fs::create_directories(cfg.out);
      std::ofstream(cfg.out / "loss_report.json") << text;
    }
    return 0;
  }
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UM-CAM fusion and seed pseudo-label toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;

  app.add_option("--config", f.config, "JSON config file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--manifest", f.manifest, "dataset manifest JSON");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--mode", f.mode,
                 "fuse: um_cam|average_cam|last_layer_only; spl: grad_cam_only|um_cam|spl|um_cam_plus_spl; "
                 "eval: per_slice_2d|per_volume_3d");
  app.add_option("--threshold", f.threshold, "binarisation threshold for spl (skips the grid-search value)");
  app.add_option("--alpha", f.alpha, "geodesic sharpness");
  app.add_option("--lambda", f.lambda, "UM-CAM weight in the joint loss and combined target");
  app.add_option("--workers", f.workers, "slice-level worker threads");
  app.add_option("--seed", f.seed, "synthetic data seed");
  app.add_option("--count", f.count, "synthetic slice count");
  app.add_option("--max-block", f.max_block, "highest feature block index M");
  app.add_option("--solver", f.solver, "raster_scan|dijkstra");
  app.add_option("--passes", f.passes, "raster sweep round trips");
  app.add_option("--margin", f.margin, "bounding-box margin for background seeds");
  app.add_option("--connectivity", f.connectivity, "4 or 8");
  app.add_option("--negatives", f.negatives, "all_background|skip");
  app.add_option("--spacing", f.spacing, "voxel spacing: slice row col")->expected(3);

  app.add_subcommand("synth", "generate a synthetic dataset");
  app.add_subcommand("fuse", "fuse CAMs and grid-search the threshold");
  app.add_subcommand("spl", "build seed pseudo labels and supervision targets");
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--predictions", f.predictions, "directory of <slice_id>.npy maps")->required();
  auto* le = app.add_subcommand("loss-eval", "joint loss over prediction / UM-CAM / SPL triples");
  le->add_option("--prediction", f.pred_files)->required();
  le->add_option("--um-cam", f.um_files)->required();
  le->add_option("--spl-target", f.spl_files)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (std::getenv("UMCAM_VERBOSE") != nullptr) {
    std::cerr << "kernels: " << kernels::isa_name(kernels::active().isa) << "\n";
  }
  try {
    return run(command, f);
  } catch (const ConfigError& e) {
    std::cerr << "umcam: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "umcam: " << e.what() << "\n";
    return 1;
  }
}
