#include <gtest/gtest.h>

#include <fstream>

#include "mcae/config.hpp"
#include "test_support.hpp"

using namespace mcae;
using namespace mcae::testing;

TEST(Config, DefaultsAreValid) {
  EngineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.annotation_grid().tile_count(), 100u);
  EXPECT_EQ(c.fine_grid().rows, 19);
  EXPECT_EQ(c.fine_grid().tile_box({1, 1}).x0, 64);
  EXPECT_EQ(c.coarse_grid().tile_size, 64);
  EXPECT_EQ(c.class_schema().size(), 8u);
}

TEST(Config, SetParsesValues) {
  EngineConfig c;
  c.set("cluster.eps", "0.2");
  c.set("cluster.min_pts", "7");
  c.set("auto_label", "false");
  c.set("paths.features", "f.mcft");
  c.set("schema", "oem9");
  EXPECT_EQ(c.cluster.eps, 0.2);
  EXPECT_EQ(c.cluster.min_pts, 7u);
  EXPECT_FALSE(c.auto_label);
  EXPECT_EQ(c.paths.features, std::filesystem::path("f.mcft"));
  EXPECT_EQ(c.class_schema().size(), 9u);
  c.set("paths.features", "");
  EXPECT_FALSE(c.paths.features);
}

TEST(Config, Rejections) {
  EngineConfig c;
  EXPECT_EQ(code_of([&] { c.set("cluster.epsilon", "0.1"); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { c.set("tile_size", "big"); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { c.set("cluster.min_pts", "-3"); }), ErrorCode::Config);
  EXPECT_EQ(code_of([&] { c.set("auto_label", "maybe"); }), ErrorCode::Config);
  auto bad = [](const char* k, const char* v) {
    EngineConfig e;
    e.set(k, v);
    return code_of([&] { e.validate(); });
  };
  EXPECT_EQ(bad("overlap_ratio", "0.25"), ErrorCode::Config);
  EXPECT_EQ(bad("tile_size", "30"), ErrorCode::Config);
  EXPECT_EQ(bad("cluster.eps", "0"), ErrorCode::Config);
  EXPECT_EQ(bad("consistency.iou_match", "0.05"), ErrorCode::Config);
  EXPECT_EQ(bad("fusion.min_fragment_px", "0"), ErrorCode::Config);
  EXPECT_EQ(bad("schema", "oem12"), ErrorCode::Config);
  EXPECT_EQ(bad("curation.regions", "101"), ErrorCode::Config);
}

TEST(Config, SaveLoadRoundTrip) {
  TempDir dir("cfg");
  EngineConfig c;
  c.set("cluster.eps", "0.15");
  c.set("pixel_size_m", "0.3");
  c.set("curation.n_per_region", "12");
  c.set("paths.features", "x/y.mcft");
  c.save(dir / "c.ini");
  const auto back = load_config(dir / "c.ini");
  EXPECT_EQ(back.entries(), c.entries());
  std::ifstream in(dir / "c.ini");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("eps=0.15"), std::string::npos);
  EXPECT_NE(text.find("pixel_size_m=0.3"), std::string::npos);
}

TEST(Config, LoadRejectsUnknownKeysAndSyntax) {
  TempDir dir("cfg");
  {
    std::ofstream out(dir / "a.ini");
    out << "seed=4\n[cluster]\neps=0.1\nbogus=1\n";
  }
  EXPECT_EQ(code_of([&] { load_config(dir / "a.ini"); }), ErrorCode::Config);
  {
    std::ofstream out(dir / "b.ini");
    out << "seed=4\n[cluster\n";
  }
  EXPECT_EQ(code_of([&] { load_config(dir / "b.ini"); }), ErrorCode::Config);
  {
    std::ofstream out(dir / "c.ini");
    out << "seed=4\n[cluster]\nmin_pts=3\n";
  }
  const auto c = load_config(dir / "c.ini");
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.cluster.min_pts, 3u);
  EXPECT_EQ(c.cluster.eps, 0.15);
  EXPECT_EQ(code_of([&] { load_config(dir / "missing.ini"); }), ErrorCode::Config);
}
