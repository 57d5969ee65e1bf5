// mcae command-line driver.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mcae/annotation_store.hpp"
#include "mcae/clustering.hpp"
#include "mcae/config.hpp"
#include "mcae/curation.hpp"
#include "mcae/features.hpp"
#include "mcae/fusion.hpp"
#include "mcae/image_io.hpp"
#include "mcae/kernels.hpp"
#include "mcae/metrics.hpp"
#include "mcae/pipeline.hpp"
#include "mcae/server.hpp"
#include "mcae/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcae;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string log_level = "info";
};

EngineConfig make_config(const Globals& g) {
  EngineConfig cfg = g.config_file.empty() ? EngineConfig{} : load_config(g.config_file);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, "override '" + kv + "' is not key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

TilePos parse_tile(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) fail(ErrorCode::InvalidArgument, "tile must be row,col");
  try {
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "tile must be row,col");
  }
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

json progress_to_json(const SessionStore& store) {
  const Progress p = store.progress();
  json stages = json::object();
  for (const auto& [stage, counts] : p.per_stage) {
    stages[std::string(to_string(stage))] = {{"total", counts.first}, {"decided", counts.second}};
  }
  json classes = json::object();
  for (const auto& [cls, n] : p.masks_per_class) classes[store.schema().at(cls).name] = n;
  json out = {{"decided", p.decided},
              {"remaining", p.remaining},
              {"masks_labeled", p.masks_labeled},
              {"per_stage", stages},
              {"per_class", classes}};
  if (!store.clusters().empty()) {
    const CostReport c = store.cost();
    out["cost"] = {{"n_masks", c.n_masks},       {"n_clusters", c.n_clusters}, {"pixel_cost", c.pixel_cost},
                   {"mask_cost", c.mask_cost},   {"mcae_cost", c.mcae_cost},
                   {"avg_masks_per_cluster", c.avg_masks_per_cluster}};
  }
  return out;
}

std::vector<fs::path> raster_files(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.path().extension() == ".png") out.push_back(e.path().filename());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcae: cluster-level annotation engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override a config key (section.key=value)");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  std::string synth_out;
  synth->add_option("--out", synth_out)->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "resolve fine overlaps and fuse fine/coarse masks");
  std::string fine_in, coarse_in, fuse_out;
  bool no_resolve = false;
  fuse->add_option("--fine", fine_in)->required()->check(CLI::ExistingFile);
  fuse->add_option("--coarse", coarse_in)->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", fuse_out)->required();
  fuse->add_flag("--no-resolve", no_resolve, "skip cross-tile duplicate resolution");

  // features
  auto* feats = app.add_subcommand("features", "handcrafted descriptors for a mask set");
  std::string images_dir, masks_in, feats_out;
  feats->add_option("--images", images_dir)->required()->check(CLI::ExistingDirectory);
  feats->add_option("--masks", masks_in)->required()->check(CLI::ExistingFile);
  feats->add_option("--out", feats_out)->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "hierarchical window clustering");
  std::string cl_masks, cl_feats, cl_ref, cl_out, cl_session, cl_images;
  bool cl_all = false;
  cluster->add_option("--masks", cl_masks)->required()->check(CLI::ExistingFile);
  cluster->add_option("--features", cl_feats)->required();
  cluster->add_option("--reference", cl_ref)->required()->check(CLI::ExistingFile);
  cluster->add_option("--out", cl_out)->required();
  cluster->add_flag("--all", cl_all, "also write clusters below the purity threshold");
  cluster->add_option("--session", cl_session, "create a session directory over the result");
  cluster->add_option("--images", cl_images, "tile imagery for session thumbnails");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "annotation HTTP server");
  std::string sv_session, sv_addr = "127.0.0.1:8731", sv_ui;
  serve_cmd->add_option("--session", sv_session)->required();
  serve_cmd->add_option("--addr", sv_addr);
  serve_cmd->add_option("--ui", sv_ui, "static UI directory");

  // export
  auto* export_cmd = app.add_subcommand("export", "export the sparse label raster");
  std::string ex_session, ex_out;
  export_cmd->add_option("--session", ex_session)->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--out", ex_out)->required();

  // stats
  auto* stats = app.add_subcommand("stats", "session progress and cost");
  std::string st_session;
  stats->add_option("--session", st_session)->required()->check(CLI::ExistingDirectory);

  // curate
  auto* curate = app.add_subcommand("curate", "test-set curation");
  curate->require_subcommand(1);
  auto* partition = curate->add_subcommand("partition", "SKATER partition of the tile grid");
  std::string pa_feats, pa_masks, pa_out;
  std::size_t pa_p = 0;
  partition->add_option("--features", pa_feats)->required()->check(CLI::ExistingFile);
  partition->add_option("--masks", pa_masks)->required()->check(CLI::ExistingFile);
  partition->add_option("--P", pa_p, "region count (default ceil(tiles/400))");
  partition->add_option("--out", pa_out)->required();

  auto* sample = curate->add_subcommand("sample", "stratified tile sample for one round");
  std::string sa_partition, sa_dir;
  std::uint32_t sa_round = 1;
  std::optional<std::size_t> sa_n;
  std::optional<std::uint64_t> sa_seed;
  sample->add_option("--partition", sa_partition)->required()->check(CLI::ExistingFile);
  sample->add_option("--dir", sa_dir, "curation directory holding round manifests")->required();
  sample->add_option("--round", sa_round);
  sample->add_option("--n", sa_n);
  sample->add_option("--seed", sa_seed);

  auto* draft = curate->add_subcommand("draft", "prediction drafts snapped to masks");
  std::string dr_pred, dr_masks, dr_round, dr_out, dr_tile;
  draft->add_option("--pred", dr_pred)->required()->check(CLI::ExistingFile);
  draft->add_option("--masks", dr_masks)->required()->check(CLI::ExistingFile);
  draft->add_option("--round", dr_round, "round manifest; drafts every sampled tile");
  draft->add_option("--tile", dr_tile, "single tile row,col");
  draft->add_option("--out", dr_out, "output directory")->required();

  auto* refine = curate->add_subcommand("refine", "apply refinement edits to a draft");
  std::string rf_draft, rf_edits, rf_out, rf_round, rf_tile;
  refine->add_option("--draft", rf_draft)->required()->check(CLI::ExistingFile);
  refine->add_option("--edits", rf_edits)->required()->check(CLI::ExistingFile);
  refine->add_option("--out", rf_out)->required();
  refine->add_option("--round", rf_round, "round manifest to mark the tile refined in");
  refine->add_option("--tile", rf_tile, "tile row,col for the round manifest");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "confusion-matrix metrics");
  std::string ev_gt, ev_pred, ev_schema, ev_out;
  evaluate->add_option("--gt", ev_gt)->required()->check(CLI::ExistingPath);
  evaluate->add_option("--pred", ev_pred)->required()->check(CLI::ExistingPath);
  evaluate->add_option("--schema", ev_schema);
  evaluate->add_option("--out", ev_out);

  // run
  auto* run = app.add_subcommand("run", "full pipeline on a scene");
  std::string run_scene, run_out;
  bool run_generate = false;
  run->add_option("--scene", run_scene);
  run->add_option("--out", run_out);
  run->add_flag("--generate", run_generate, "generate the synthetic scene first if missing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    spdlog::set_default_logger(spdlog::default_logger()->clone("mcae"));
    if (g.threads > 0) kernels::set_thread_count(g.threads);
    const EngineConfig cfg = make_config(g);
    const TileGrid grid = cfg.annotation_grid();

    if (*synth) {
      SceneSpec spec;
      spec.seed = cfg.seed;
      spec.tile_size = cfg.tile_size;
      spec.rows = cfg.grid_rows;
      spec.cols = cfg.grid_cols;
      spec.pixel_size_m = cfg.pixel_size_m;
      write_scene(synth_out, generate_scene(spec));
      spdlog::info("scene written to {}", synth_out);
    } else if (*fuse) {
      auto fine = read_mask_set(fine_in);
      if (!no_resolve) fine = resolve_overlap_tiles(fine, cfg.fine_grid(), cfg.consistency);
      const auto fused = fuse_scales(to_mosaic_frame(fine, cfg.fine_grid()),
                                     coarse_to_fine_frame(read_mask_set(coarse_in), cfg.coarse_grid()), cfg.fusion);
      write_mask_set(fuse_out, anchor_all(fused, grid));
      spdlog::info("{} fused masks", fused.size());
    } else if (*feats) {
      const auto masks = read_mask_set(masks_in);
      export_features(feats_out, compute_descriptors(read_mosaic(images_dir, grid), masks, grid));
    } else if (*cluster) {
      if (!fs::exists(cl_feats)) fail(ErrorCode::Io, "features file not found: " + cl_feats);
      const auto masks = read_mask_set(cl_masks);
      const auto result =
          hierarchical_cluster(masks, import_features(cl_feats), read_label_raster(cl_ref), grid, cfg.cluster);
      std::vector<ClusterCandidate> out;
      for (const auto& c : result.all()) {
        if (cl_all || c.suggested) out.push_back(c);
      }
      write_clusters(cl_out, out);
      spdlog::info("stage1 {} stage2 {} residual {} written {}", result.stage1.size(), result.stage2.size(),
                   result.residual.size(), out.size());
      if (!cl_session.empty()) {
        const fs::path dir = cl_session;
        fs::create_directories(dir);
        if (cl_all) {
          write_clusters(dir / "clusters.jsonl", [&] {
            std::vector<ClusterCandidate> s;
            for (const auto& c : out) {
              if (c.suggested) s.push_back(c);
            }
            return s;
          }());
        } else {
          fs::copy_file(cl_out, dir / "clusters.jsonl", fs::copy_options::overwrite_existing);
        }
        fs::copy_file(cl_masks, dir / "masks.jsonl", fs::copy_options::overwrite_existing);
        SessionInfo info;
        info.schema = cfg.schema;
        info.grid = grid;
        info.pixel_size_m = cfg.pixel_size_m;
        info.clusters_file = "clusters.jsonl";
        info.masks_file = "masks.jsonl";
        if (!cl_images.empty()) info.images_dir = fs::relative(fs::absolute(cl_images), fs::absolute(dir));
        info.save(dir);
        SessionStore::open(dir);  // validates the session
      }
    } else if (*serve_cmd) {
      const auto colon = sv_addr.rfind(':');
      if (colon == std::string::npos) fail(ErrorCode::Config, "--addr must be host:port");
      ServeOptions opts;
      opts.host = sv_addr.substr(0, colon);
      try {
        opts.port = std::stoi(sv_addr.substr(colon + 1));
      } catch (const std::exception&) {
        fail(ErrorCode::Config, "--addr must be host:port");
      }
      if (!sv_ui.empty()) opts.ui_dir = sv_ui;
      AnnotateService service(sv_session);
      serve(service, opts);
    } else if (*export_cmd) {
      const SessionStore store = SessionStore::open(ex_session);
      write_label_raster(ex_out, export_sparse(store), store.schema().name());
    } else if (*stats) {
      print_json(progress_to_json(SessionStore::open(st_session)));
    } else if (*partition) {
      const auto embeddings = tile_embeddings(import_features(pa_feats), read_mask_set(pa_masks), grid);
      const RegionPartition p = skater_partition(grid, embeddings, pa_p ? pa_p : default_region_count(grid));
      save_partition(pa_out, p, grid);
      spdlog::info("{} regions, ssd {}", p.size(), p.ssd);
    } else if (*sample) {
      TileGrid pgrid;
      const RegionPartition p = load_partition(sa_partition, &pgrid);
      RefinementRound round;
      round.round = sa_round;
      round.seed = sa_seed.value_or(cfg.curation.seed);
      round.n_per_region = sa_n.value_or(cfg.curation.n_per_region);
      const SampleResult s = stratified_sample(p, round.n_per_region, round.seed, previously_sampled(sa_dir, sa_round));
      round.sampled_tiles = s.tiles;
      for (const auto& t : s.tiles) round.status[t] = TileStatus::Drafted;
      round.save(round_manifest_path(sa_dir, sa_round));
      if (!s.short_regions.empty()) spdlog::warn("{} regions had fewer than {} tiles left", s.short_regions.size(), round.n_per_region);
      print_json({{"round", round.round}, {"tiles", s.tiles.size()}, {"short_regions", s.short_regions}});
    } else if (*draft) {
      const LabelRaster pred = read_label_raster(dr_pred);
      const auto masks = read_mask_set(dr_masks);
      std::vector<TilePos> tiles;
      if (!dr_round.empty()) tiles = RefinementRound::load(dr_round).sampled_tiles;
      if (!dr_tile.empty()) tiles.push_back(parse_tile(dr_tile));
      if (tiles.empty()) fail(ErrorCode::InvalidArgument, "draft needs --round or --tile");
      for (const TilePos& t : tiles) {
        const BBox b = grid.tile_box(t);
        if (b.x1() > pred.width || b.y1() > pred.height) fail(ErrorCode::OutOfBounds, "prediction does not cover the tile");
        write_label_raster(fs::path(dr_out) / tile_image_name(t.row, t.col),
                           draft_annotation(pred.crop(b.x0, b.y0, b.w, b.h), masks_for_tile(masks, grid, t)), cfg.schema);
      }
    } else if (*refine) {
      const LabelRaster refined = apply_refinement(read_label_raster(rf_draft), read_edits(rf_edits), cfg.class_schema());
      write_label_raster(rf_out, refined, cfg.schema);
      if (!rf_round.empty()) {
        if (rf_tile.empty()) fail(ErrorCode::InvalidArgument, "--round needs --tile");
        RefinementRound round = RefinementRound::load(rf_round);
        round.mark_refined(parse_tile(rf_tile));
        round.save(rf_round);
      }
    } else if (*evaluate) {
      const ClassSchema schema = schema_by_name(ev_schema.empty() ? cfg.schema : ev_schema);
      ConfusionMatrix cm(static_cast<std::uint32_t>(schema.size()));
      const bool dirs = fs::is_directory(ev_gt);
      if (dirs != fs::is_directory(ev_pred)) fail(ErrorCode::InvalidArgument, "--gt and --pred must both be files or directories");
      for (const auto& name : raster_files(ev_gt)) {
        const fs::path gt_path = dirs ? fs::path(ev_gt) / name : fs::path(ev_gt);
        const fs::path pred_path = dirs ? fs::path(ev_pred) / name : fs::path(ev_pred);
        if (!fs::exists(pred_path)) fail(ErrorCode::Io, "no prediction for " + name.string());
        cm += confusion(read_label_raster(gt_path), read_label_raster(pred_path), schema);
      }
      const std::string report = metrics_report_json(metrics(cm), cm, schema);
      if (ev_out.empty()) {
        std::cout << report << '\n';
      } else {
        std::ofstream(ev_out, std::ios::trunc) << report << '\n';
      }
    } else if (*run) {
      EngineConfig rc = cfg;
      if (!run_scene.empty()) rc.paths.scene = run_scene;
      if (!run_out.empty()) rc.paths.run = run_out;
      if (run_generate && !fs::exists(rc.paths.scene / scene_files::kSpec)) {
        SceneSpec spec;
        spec.seed = rc.seed;
        spec.tile_size = rc.tile_size;
        spec.rows = rc.grid_rows;
        spec.cols = rc.grid_cols;
        spec.pixel_size_m = rc.pixel_size_m;
        write_scene(rc.paths.scene, generate_scene(spec));
      }
      const RunSummary s = run_pipeline(rc);
      print_json({{"run_dir", s.run_dir.string()},
                  {"fine_in", s.fine_in},
                  {"fine_kept", s.fine_kept},
                  {"fused", s.fused},
                  {"stage1", s.stage1},
                  {"stage2", s.stage2},
                  {"residual", s.residual},
                  {"suggested", s.suggested},
                  {"painted_px", s.painted_px},
                  {"agree_px", s.agree_px},
                  {"regions", s.regions},
                  {"sampled_tiles", s.sampled_tiles},
                  {"manifest_sha256", s.manifest_sha256}});
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("Io: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("internal: {}", e.what());
    return 4;
  }
  return 0;
}
