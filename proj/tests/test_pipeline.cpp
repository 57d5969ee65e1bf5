#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mcae/curation.hpp"
#include "mcae/digest.hpp"
#include "mcae/image_io.hpp"
#include "mcae/pipeline.hpp"
#include "mcae/synth.hpp"
#include "test_support.hpp"

using namespace mcae;
using namespace mcae::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(MCAE_BIN) + " --log-level off " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EngineConfig config_for(const fs::path& scene, const fs::path& run) {
  EngineConfig c;
  c.paths.scene = scene;
  c.paths.run = run;
  return c;
}

}  // namespace

TEST(Pipeline, DeterministicManifestAndFullAgreement) {
  TempDir dir("pipe");
  write_scene(dir / "scene", generate_scene(SceneSpec{}));
  const auto a = run_pipeline(config_for(dir / "scene", dir / "run_a"));
  const auto b = run_pipeline(config_for(dir / "scene", dir / "run_b"));
  EXPECT_EQ(a.manifest_sha256, b.manifest_sha256);
  EXPECT_EQ(slurp(dir / "run_a" / run_files::kManifest), slurp(dir / "run_b" / run_files::kManifest));
  EXPECT_EQ(sha256_hex(slurp(dir / "run_a" / run_files::kManifest)), a.manifest_sha256);
  EXPECT_GT(a.painted_px, 0u);
  EXPECT_EQ(a.agree_px, a.painted_px);
  EXPECT_GT(a.stage1, 0u);
  EXPECT_GT(a.stage2, 0u);
  EXPECT_LT(a.fine_kept, a.fine_in);

  const json m = json::parse(slurp(dir / "run_a" / run_files::kManifest));
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["stages"], json::parse(R"(["load","resolve","fuse","features","cluster","session","export","curate","evaluate"])"));
  EXPECT_FALSE(m.contains("failed_stage"));
  EXPECT_EQ(m["config"]["cluster.eps"], "0.15");
  for (const char* rel : {run_files::kFused, run_files::kFeatures, run_files::kClusters, run_files::kSparse, run_files::kReport}) {
    ASSERT_TRUE(m["outputs"].contains(rel)) << rel;
    EXPECT_EQ(m["outputs"][rel], sha256_file(dir / "run_a" / rel)) << rel;
  }
  EXPECT_TRUE(m["inputs"].contains(scene_files::kGroundTruth));

  const json report = json::parse(slurp(dir / "run_a" / run_files::kReport));
  EXPECT_EQ(report["sparse"]["painted_px"], a.painted_px);
  EXPECT_GT(report["prediction"]["oa"].get<double>(), 0.9);
}

TEST(Pipeline, SparseRasterMatchesTruthWherePainted) {
  TempDir dir("pipe");
  const auto scene = generate_scene(SceneSpec{});
  write_scene(dir / "scene", scene);
  run_pipeline(config_for(dir / "scene", dir / "run"));
  const auto sparse = read_label_raster(dir / "run" / run_files::kSparse);
  ASSERT_EQ(sparse.width, scene.ground_truth.width);
  std::size_t painted = 0;
  for (std::size_t i = 0; i < sparse.data.size(); ++i) {
    if (sparse.data[i] == kIgnoreId) continue;
    ++painted;
    ASSERT_EQ(sparse.data[i], scene.ground_truth.data[i]) << "pixel " << i;
  }
  EXPECT_GT(painted, 0u);
}

TEST(Pipeline, MissingFeaturesFailsAtClusterStage) {
  TempDir dir("pipe");
  write_scene(dir / "scene", generate_scene(SceneSpec{}));
  auto cfg = config_for(dir / "scene", dir / "run");
  cfg.paths.features = dir / "nope.mcft";
  try {
    run_pipeline(cfg);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "cluster");
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  const json m = json::parse(slurp(dir / "run" / run_files::kManifest));
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["failed_stage"], "cluster");
  EXPECT_EQ(m["stages"], json::parse(R"(["load","resolve","fuse","features"])"));
}

TEST(Pipeline, PrecomputedFeaturesAreUsed) {
  TempDir dir("pipe");
  write_scene(dir / "scene", generate_scene(SceneSpec{}));
  run_pipeline(config_for(dir / "scene", dir / "run_a"));
  fs::copy_file(dir / "run_a" / run_files::kFeatures, dir / "given.mcft");
  auto cfg = config_for(dir / "scene", dir / "run_b");
  cfg.paths.features = dir / "given.mcft";
  run_pipeline(cfg);
  EXPECT_FALSE(fs::exists(dir / "run_b" / run_files::kFeatures));
  EXPECT_EQ(slurp(dir / "run_a" / run_files::kClusters), slurp(dir / "run_b" / run_files::kClusters));
  const json m = json::parse(slurp(dir / "run_b" / run_files::kManifest));
  EXPECT_TRUE(m["inputs"].contains("features"));
}

TEST(Pipeline, MissingSceneIsIoError) {
  TempDir dir("pipe");
  try {
    run_pipeline(config_for(dir / "none", dir / "run"));
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Pipeline, AutoLabelExcludesMismatchedMembers) {
  const TileGrid grid(8, 1, 2);
  std::vector<MaskRecord> masks;
  for (std::uint64_t id = 1; id <= 3; ++id)
    masks.push_back(MaskRecord::make(id, {0, 0}, Scale::Fused, rect_mask(static_cast<std::int32_t>(2 * id), 0, 1, 1)));
  SessionStore store(ClassSchema::oem8(), grid, 1, {{1, Stage::Small, {0, 0, 3}, {1, 2, 3}, 0, 1.0, true}}, masks);
  LabelRaster truth(16, 8, 4);
  truth.data[6] = 2;  // mask 3
  auto_label_from_truth(store, truth);
  const auto& d = store.effective().at(1);
  EXPECT_EQ(d.verdict, Verdict::Labeled);
  EXPECT_EQ(d.class_id, 4);
  EXPECT_EQ(d.excluded_member_ids, std::vector<std::uint64_t>{3});
  EXPECT_EQ(d.annotator, "auto-gt");
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
  TempDir dir("cli");
  EXPECT_EQ(cli("--set cluster.bogus=1 run --scene " + (dir / "s").string() + " --out " + (dir / "r").string()).code, 2);
  EXPECT_EQ(cli("--set cluster.eps=5 run --scene " + (dir / "s").string() + " --out " + (dir / "r").string()).code, 2);
  EXPECT_EQ(cli("run --scene " + (dir / "s").string() + " --out " + (dir / "r").string()).code, 3);
  {
    std::ofstream(dir / "bad.jsonl") << "{\"id\":1}\n";
  }
  EXPECT_EQ(cli("fuse --fine " + (dir / "bad.jsonl").string() + " --coarse " + (dir / "bad.jsonl").string() +
                " --out " + (dir / "o.jsonl").string())
                .code,
            3);
}

TEST(Cli, ModuleByModuleWorkflow) {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  ASSERT_EQ(cli("synth --out " + d + "/scene").code, 0);
  ASSERT_EQ(cli("fuse --fine " + d + "/scene/masks_fine.jsonl --coarse " + d + "/scene/masks_coarse.jsonl --out " + d +
                "/fused.jsonl")
                .code,
            0);
  const auto fused = read_mask_set(dir / "fused.jsonl");
  ASSERT_FALSE(fused.empty());
  for (const auto& r : fused) ASSERT_EQ(r.scale, Scale::Fused);

  ASSERT_EQ(cli("features --images " + d + "/scene/images --masks " + d + "/fused.jsonl --out " + d + "/f.mcft").code, 0);
  EXPECT_EQ(import_features(dir / "f.mcft").size(), fused.size());

  ASSERT_EQ(cli("cluster --masks " + d + "/fused.jsonl --features " + d + "/f.mcft --reference " + d +
                "/scene/gt.png --out " + d + "/clusters.jsonl --session " + d + "/session --images " + d +
                "/scene/images")
                .code,
            0);
  const auto clusters = read_clusters(dir / "clusters.jsonl");
  ASSERT_FALSE(clusters.empty());
  for (const auto& c : clusters) EXPECT_TRUE(c.suggested);
  EXPECT_EQ(cli("cluster --masks " + d + "/fused.jsonl --features " + d + "/missing.mcft --reference " + d +
                "/scene/gt.png --out " + d + "/c2.jsonl")
                .code,
            3);

  auto stats = cli("stats --session " + d + "/session");
  ASSERT_EQ(stats.code, 0);
  const json st = json::parse(stats.out);
  EXPECT_EQ(st["remaining"], clusters.size());
  EXPECT_EQ(st["decided"], 0);

  {
    auto store = SessionStore::open(dir / "session");
    store.record_decision({clusters[0].id, Verdict::Labeled, 3, {}, "t", 1});
  }
  ASSERT_EQ(cli("export --session " + d + "/session --out " + d + "/sparse.png").code, 0);
  const auto sparse = read_label_raster(dir / "sparse.png");
  EXPECT_TRUE(std::any_of(sparse.data.begin(), sparse.data.end(), [](ClassId c) { return c == 3; }));

  ASSERT_EQ(cli("curate partition --features " + d + "/f.mcft --masks " + d + "/fused.jsonl --P 4 --out " + d +
                "/partition.json")
                .code,
            0);
  ASSERT_EQ(cli("curate sample --partition " + d + "/partition.json --dir " + d + "/cur --n 2 --seed 5").code, 0);
  ASSERT_EQ(cli("curate sample --partition " + d + "/partition.json --dir " + d + "/cur --round 2 --n 2 --seed 5").code, 0);
  const auto r1 = RefinementRound::load(dir / "cur" / "round_1.json");
  const auto r2 = RefinementRound::load(dir / "cur" / "round_2.json");
  EXPECT_EQ(r1.sampled_tiles.size(), 8u);
  for (const auto& t : r2.sampled_tiles) EXPECT_EQ(std::count(r1.sampled_tiles.begin(), r1.sampled_tiles.end(), t), 0);

  ASSERT_EQ(cli("curate draft --pred " + d + "/scene/pred.png --masks " + d + "/fused.jsonl --round " + d +
                "/cur/round_1.json --out " + d + "/drafts")
                .code,
            0);
  const TilePos t0 = r1.sampled_tiles[0];
  const fs::path draft = dir / "drafts" / tile_image_name(t0.row, t0.col);
  ASSERT_TRUE(fs::exists(draft)) << draft;
  {
    std::ofstream(dir / "edits.json") << R"({"edits":[{"rect":[0,0,4,4],"class":6}]})";
  }
  const std::string tile_arg = std::to_string(t0.row) + "," + std::to_string(t0.col);
  ASSERT_EQ(cli("curate refine --draft " + draft.string() + " --edits " + d + "/edits.json --out " + d +
                "/refined.png --round " + d + "/cur/round_1.json --tile " + tile_arg)
                .code,
            0);
  EXPECT_EQ(read_label_raster(dir / "refined.png").at(2, 2), 6);
  EXPECT_EQ(RefinementRound::load(dir / "cur" / "round_1.json").status.at(t0), TileStatus::Refined);

  auto ev = cli("evaluate --gt " + d + "/scene/gt.png --pred " + d + "/scene/pred.png --out " + d + "/ev.json");
  ASSERT_EQ(ev.code, 0);
  const json evj = json::parse(slurp(dir / "ev.json"));
  EXPECT_GT(evj["oa"].get<double>(), 0.9);
}

TEST(Cli, RunPrintsSummaryAndHonoursOverrides) {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  auto r = cli("--set curation.n_per_region=5 --threads 2 run --scene " + d + "/scene --out " + d + "/run --generate");
  ASSERT_EQ(r.code, 0);
  const json s = json::parse(r.out);
  EXPECT_EQ(s["agree_px"], s["painted_px"]);
  EXPECT_EQ(s["sampled_tiles"], 5);
  const json m = json::parse(slurp(dir / "run" / run_files::kManifest));
  EXPECT_EQ(m["config"]["curation.n_per_region"], "5");
  EXPECT_FALSE(m.contains("manifest_sha256"));
  EXPECT_EQ(sha256_hex(slurp(dir / "run" / run_files::kManifest)), s["manifest_sha256"]);
}
