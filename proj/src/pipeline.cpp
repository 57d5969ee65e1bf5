#include "mcae/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>

#include "mcae/clustering.hpp"
#include "mcae/curation.hpp"
#include "mcae/digest.hpp"
#include "mcae/features.hpp"
#include "mcae/fusion.hpp"
#include "mcae/image_io.hpp"
#include "mcae/metrics.hpp"
#include "mcae/synth.hpp"

namespace mcae {

namespace fs = std::filesystem;
using nlohmann::json;

void auto_label_from_truth(SessionStore& store, const LabelRaster& truth, const std::string& annotator) {
  const TileGrid& grid = store.grid();
  for (const auto& cluster : store.clusters()) {
    std::map<std::uint64_t, ClassId> votes;
    std::map<ClassId, std::size_t> tally;
    for (std::uint64_t id : cluster.member_ids) {
      const MaskRecord* m = store.find_mask(id);
      const ClassId c = majority_vote_label(truth, global_frame(*m, grid));
      votes[id] = c;
      if (c != kIgnoreId) ++tally[c];
    }
    ClusterDecision d;
    d.cluster_id = cluster.id;
    d.annotator = annotator;
    d.timestamp = 0;
    if (tally.empty()) {
      d.verdict = Verdict::Rejected;
    } else {
      const auto best = std::max_element(tally.begin(), tally.end(), [](const auto& a, const auto& b) {
        return a.second < b.second || (a.second == b.second && a.first > b.first);
      });
      d.verdict = Verdict::Labeled;
      d.class_id = best->first;
      for (const auto& [id, c] : votes) {
        if (c != best->first) d.excluded_member_ids.push_back(id);
      }
    }
    store.record_decision(d);
  }
}

namespace {

class Runner {
 public:
  explicit Runner(const EngineConfig& cfg) : cfg_(cfg), run_(cfg.paths.run), scene_(cfg.paths.scene) {}

  void stage(const std::string& name, const std::function<void()>& body) {
    spdlog::info("stage {}", name);
    try {
      body();
    } catch (const Error& e) {
      write_manifest(name);
      throw StageError(name, e);
    } catch (const std::exception& e) {
      write_manifest(name);
      throw StageError(name, Error(ErrorCode::Io, e.what()));
    }
    stages_.push_back(name);
  }

  void input(const fs::path& path, const std::string& label) { inputs_[label] = sha256_file(path); }
  fs::path out(const std::string& rel) {
    const fs::path p = run_ / rel;
    fs::create_directories(p.parent_path());
    outputs_.push_back(rel);
    return p;
  }

  std::string write_manifest(const std::string& failed_stage = {}) {
    json config = json::object();
    for (const auto& [k, v] : cfg_.entries()) {
      if (k.rfind("paths.", 0) != 0) config[k] = v;
    }
    json outputs = json::object();
    for (const auto& rel : outputs_) {
      if (fs::exists(run_ / rel)) outputs[rel] = sha256_file(run_ / rel);
    }
    json m = {{"version", kVersion},
              {"seeds", {{"seed", cfg_.seed}, {"curation_seed", cfg_.curation.seed}}},
              {"config", config},
              {"inputs", inputs_},
              {"outputs", outputs},
              {"stages", stages_},
              {"status", failed_stage.empty() ? "ok" : "failed"}};
    if (!failed_stage.empty()) m["failed_stage"] = failed_stage;
    fs::create_directories(run_);
    const std::string text = m.dump(2) + "\n";
    std::ofstream(run_ / run_files::kManifest, std::ios::trunc | std::ios::binary) << text;
    return sha256_hex(text);
  }

  const EngineConfig& cfg_;
  fs::path run_;
  fs::path scene_;
  std::vector<std::string> stages_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> inputs_;
};

}  // namespace

RunSummary run_pipeline(const EngineConfig& cfg) {
  cfg.validate();
  Runner run(cfg);
  RunSummary summary;
  summary.run_dir = cfg.paths.run;
  const TileGrid grid = cfg.annotation_grid();
  const TileGrid fine_grid = cfg.fine_grid();
  const TileGrid coarse_grid = cfg.coarse_grid();
  const ClassSchema schema = cfg.class_schema();
  const fs::path scene = cfg.paths.scene;

  std::vector<MaskRecord> kept, fused;
  LabelRaster truth, prediction;
  FeatureTable features;
  std::vector<ClusterCandidate> suggested;

  run.stage("load", [&] {
    const SceneSpec spec = read_scene_spec(scene);
    if (spec.tile_size != cfg.tile_size || spec.rows != cfg.grid_rows || spec.cols != cfg.grid_cols) {
      fail(ErrorCode::DimMismatch, "scene grid differs from configured grid");
    }
    for (const char* f : {scene_files::kSpec, scene_files::kFine, scene_files::kCoarse, scene_files::kGroundTruth,
                          scene_files::kPrediction}) {
      run.input(scene / f, f);
    }
    truth = read_label_raster(scene / scene_files::kGroundTruth);
    prediction = read_label_raster(scene / scene_files::kPrediction);
    truth.validate(schema);
    prediction.validate(schema);
    if (truth.width != grid.mosaic_width() || truth.height != grid.mosaic_height() || !(prediction.width == truth.width) ||
        prediction.height != truth.height) {
      fail(ErrorCode::DimMismatch, "label rasters do not match the mosaic size");
    }
  });

  run.stage("resolve", [&] {
    const auto fine = read_mask_set(scene / scene_files::kFine);
    summary.fine_in = fine.size();
    kept = resolve_overlap_tiles(fine, fine_grid, cfg.consistency);
    summary.fine_kept = kept.size();
    write_mask_set(run.out(run_files::kResolved), kept);
  });

  run.stage("fuse", [&] {
    const auto coarse = read_mask_set(scene / scene_files::kCoarse);
    const auto mosaic_fused =
        fuse_scales(to_mosaic_frame(kept, fine_grid), coarse_to_fine_frame(coarse, coarse_grid), cfg.fusion);
    fused = anchor_all(mosaic_fused, grid);
    summary.fused = fused.size();
    write_mask_set(run.out(run_files::kFused), fused);
  });

  run.stage("features", [&] {
    if (cfg.paths.features) return;  // consumed by the cluster stage
    const RgbImage mosaic = read_mosaic(scene / scene_files::kImages, grid);
    for (std::int32_t r = 0; r < grid.rows; ++r) {
      for (std::int32_t c = 0; c < grid.cols; ++c) {
        const std::string name = tile_image_name(r, c);
        run.input(scene / scene_files::kImages / name, std::string(scene_files::kImages) + "/" + name);
      }
    }
    features = compute_descriptors(mosaic, fused, grid);
    export_features(run.out(run_files::kFeatures), features);
  });

  run.stage("cluster", [&] {
    if (cfg.paths.features) {
      if (!fs::exists(*cfg.paths.features)) {
        fail(ErrorCode::Io, "features file not found: " + cfg.paths.features->string());
      }
      run.input(*cfg.paths.features, "features");
      features = import_features(*cfg.paths.features);
    }
    const HierarchicalResult result = hierarchical_cluster(fused, features, prediction, grid, cfg.cluster);
    summary.stage1 = result.stage1.size();
    summary.stage2 = result.stage2.size();
    summary.residual = result.residual.size();
    for (const auto& c : result.all()) {
      if (c.suggested) suggested.push_back(c);
    }
    summary.suggested = suggested.size();
    write_clusters(run.out(run_files::kCandidates), result.all());
    write_clusters(run.out(run_files::kClusters), suggested);
  });

  run.stage("session", [&] {
    const fs::path dir = run.run_ / run_files::kSession;
    fs::create_directories(dir);
    fs::remove(dir / kDecisionLog);
    SessionInfo info;
    info.schema = cfg.schema;
    info.grid = grid;
    info.pixel_size_m = cfg.pixel_size_m;
    info.clusters_file = fs::path("..") / run_files::kClusters;
    info.masks_file = fs::path("..") / run_files::kFused;
    info.images_dir = fs::relative(fs::absolute(scene / scene_files::kImages), fs::absolute(dir));
    info.save(dir);
    run.outputs_.push_back(std::string(run_files::kSession) + "/" + kSessionFile);
    if (cfg.auto_label) {
      SessionStore store = SessionStore::open(dir);
      auto_label_from_truth(store, truth);
      run.outputs_.push_back(std::string(run_files::kSession) + "/" + kDecisionLog);
    }
  });

  run.stage("export", [&] {
    const SessionStore store = SessionStore::open(run.run_ / run_files::kSession);
    const LabelRaster sparse = export_sparse(store);
    write_label_raster(run.out(run_files::kSparse), sparse, cfg.schema);
    for (std::size_t i = 0; i < sparse.data.size(); ++i) {
      if (sparse.data[i] == kIgnoreId) continue;
      ++summary.painted_px;
      if (sparse.data[i] == truth.data[i]) ++summary.agree_px;
    }
  });

  std::vector<LabelRaster> drafts;
  std::vector<TilePos> sampled;
  run.stage("curate", [&] {
    const fs::path dir = run.run_ / run_files::kCuration;
    const auto embeddings = tile_embeddings(features, fused, grid);
    const std::size_t p = cfg.curation.regions ? cfg.curation.regions : default_region_count(grid);
    const RegionPartition partition = skater_partition(grid, embeddings, p);
    summary.regions = partition.size();
    save_partition(run.out(std::string(run_files::kCuration) + "/partition.json"), partition, grid);
    for (const auto& entry : fs::exists(dir) ? fs::directory_iterator(dir) : fs::directory_iterator()) {
      if (entry.path().filename().string().rfind("round_", 0) == 0) fs::remove(entry.path());
    }
    const SampleResult sample =
        stratified_sample(partition, cfg.curation.n_per_region, cfg.curation.seed, previously_sampled(dir, 1));
    RefinementRound round;
    round.round = 1;
    round.seed = cfg.curation.seed;
    round.n_per_region = cfg.curation.n_per_region;
    round.sampled_tiles = sample.tiles;
    for (const auto& t : sample.tiles) round.status[t] = TileStatus::Drafted;
    round.save(run.out(std::string(run_files::kCuration) + "/round_1.json"));
    sampled = sample.tiles;
    summary.sampled_tiles = sampled.size();
    drafts.resize(sampled.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const BBox b = grid.tile_box(sampled[i]);
      drafts[i] = draft_annotation(prediction.crop(b.x0, b.y0, b.w, b.h), masks_for_tile(fused, grid, sampled[i]));
    }
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      write_label_raster(run.out(std::string(run_files::kCuration) + "/drafts/" +
                                 tile_image_name(sampled[i].row, sampled[i].col)),
                         drafts[i], cfg.schema);
    }
  });

  run.stage("evaluate", [&] {
    const ConfusionMatrix pred_cm = confusion(truth, prediction, schema);
    ConfusionMatrix draft_cm(static_cast<std::uint32_t>(schema.size()));
    ConfusionMatrix raw_cm(static_cast<std::uint32_t>(schema.size()));
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const BBox b = grid.tile_box(sampled[i]);
      const LabelRaster gt_tile = truth.crop(b.x0, b.y0, b.w, b.h);
      draft_cm += confusion(gt_tile, drafts[i], schema);
      raw_cm += confusion(gt_tile, prediction.crop(b.x0, b.y0, b.w, b.h), schema);
    }
    json report = {{"prediction", json::parse(metrics_report_json(metrics(pred_cm), pred_cm, schema))},
                   {"sparse", {{"painted_px", summary.painted_px}, {"agree_px", summary.agree_px}}}};
    if (draft_cm.total() > 0) {
      report["sampled_prediction"] = json::parse(metrics_report_json(metrics(raw_cm), raw_cm, schema));
      report["sampled_drafts"] = json::parse(metrics_report_json(metrics(draft_cm), draft_cm, schema));
    }
    const SessionStore store = SessionStore::open(run.run_ / run_files::kSession);
    if (!store.clusters().empty()) {
      const CostReport cost = store.cost();
      report["cost"] = {{"n_masks", cost.n_masks},
                      {"n_clusters", cost.n_clusters},
                      {"pixel_cost", cost.pixel_cost},
                      {"mask_cost", cost.mask_cost},
                      {"mcae_cost", cost.mcae_cost},
                        {"avg_masks_per_cluster", cost.avg_masks_per_cluster}};
    }
    std::ofstream(run.out(run_files::kReport), std::ios::trunc) << report.dump(2) << '\n';
  });

  summary.manifest_sha256 = run.write_manifest();
  return summary;
}

}  // namespace mcae
