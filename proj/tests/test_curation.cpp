#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "mcae/curation.hpp"
#include "skater_oracle.hpp"
#include "test_support.hpp"

using namespace mcae;
using namespace mcae::testing;

namespace {

std::vector<TileEmbedding> embed(const TileGrid& g, const std::vector<std::vector<double>>& v) {
  std::vector<TileEmbedding> out;
  for (std::int32_t r = 0; r < g.rows; ++r)
    for (std::int32_t c = 0; c < g.cols; ++c) {
      const auto& src = v[static_cast<std::size_t>(g.index({r, c}))];
      out.push_back({{r, c}, std::vector<float>(src.begin(), src.end())});
    }
  return out;
}

// Embeddings as doubles of the exact float values the partitioner sees.
std::vector<std::vector<double>> as_double(const std::vector<TileEmbedding>& e) {
  std::vector<std::vector<double>> out;
  for (const auto& t : e) out.emplace_back(t.vector.begin(), t.vector.end());
  return out;
}

std::vector<std::vector<double>> block_embeddings(const TileGrid& g, const std::function<int(int, int)>& block,
                                                  std::mt19937_64& rng, double noise) {
  const std::vector<std::vector<double>> base = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.6, 0.8, 0}};
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> out;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      auto v = base[static_cast<std::size_t>(block(r, c))];
      for (double& x : v) x += noise * n(rng);
      out.push_back(v);
    }
  return out;
}

std::vector<std::uint32_t> relabel_by_first(const std::vector<std::uint32_t>& label) {
  std::map<std::uint32_t, std::uint32_t> m;
  std::vector<std::uint32_t> out;
  for (auto l : label) {
    auto it = m.try_emplace(l, static_cast<std::uint32_t>(m.size())).first;
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// embeddings

TEST(TileEmbedding, PoolExamples) {
  const std::vector<float> a = {1, 0}, b = {0, 1};
  const auto e = pool_normalize({a, b});
  EXPECT_NEAR(e[0], std::sqrt(0.5), 1e-7);
  EXPECT_NEAR(e[1], std::sqrt(0.5), 1e-7);
  const std::vector<float> c = {3, 4};
  EXPECT_EQ(pool_normalize({c, c, c}), (std::vector<float>{0.6f, 0.8f}));
  const std::vector<float> m = {-1, 0};
  EXPECT_EQ(pool_normalize({a, m}), (std::vector<float>{0, 0}));
  EXPECT_TRUE(pool_normalize({}).empty());
  const std::vector<float> three = {1, 0, 0};
  EXPECT_EQ(code_of([&] { pool_normalize({a, three}); }), ErrorCode::DimMismatch);
}

TEST(TileEmbedding, ConstantMap) {
  FeatureMap map(5, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      float* f = map.at(x, y);
      f[0] = 2, f[1] = 0, f[2] = 2;
    }
  const auto e = tile_embedding(map);
  EXPECT_NEAR(e[0], std::sqrt(0.5), 1e-7);
  EXPECT_EQ(e[1], 0.0f);
}

TEST(TileEmbedding, GroupsByAnchorTileAndFillsEmptyTiles) {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> g;
  const TileGrid grid(16, 3, 3);
  FeatureTable table(4);
  std::vector<MaskRecord> masks;
  std::map<std::int64_t, std::vector<std::vector<float>>> per_tile;
  std::vector<std::vector<float>> all;
  for (std::uint64_t id = 1; id <= 40; ++id) {
    std::vector<float> v(4);
    for (auto& x : v) x = g(rng);
    double n = 0;
    for (float x : v) n += static_cast<double>(x) * x;
    for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
    const TilePos t{static_cast<std::int32_t>(rng() % 3), static_cast<std::int32_t>(rng() % 2)};  // column 2 empty
    masks.push_back(MaskRecord::make(id, t, Scale::Fused, rect_mask(1, 1, 2, 2)));
    table.insert(id, v);
    per_tile[grid.index(t)].push_back(v);
    all.push_back(v);
  }
  auto oracle = [](const std::vector<std::vector<float>>& vs) {
    std::vector<double> s(4, 0.0);
    for (const auto& v : vs)
      for (int k = 0; k < 4; ++k) s[static_cast<std::size_t>(k)] += v[static_cast<std::size_t>(k)];
    double n = 0;
    for (double x : s) n += x * x;
    for (double& x : s) x /= std::sqrt(n);
    return s;
  };
  const auto emb = tile_embeddings(table, masks, grid);
  ASSERT_EQ(emb.size(), 9u);
  for (const auto& e : emb) {
    const auto idx = grid.index(e.tile);
    const auto expect = per_tile.contains(idx) ? oracle(per_tile[idx]) : oracle(all);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(e.vector[static_cast<std::size_t>(k)], expect[static_cast<std::size_t>(k)], 1e-6);
  }
}

// ---------------------------------------------------------------------------
// SKATER

TEST(Skater, OneRegionAndSingletons) {
  std::mt19937_64 rng(1);
  const TileGrid g(8, 3, 4);
  const auto v = block_embeddings(g, [](int, int) { return 0; }, rng, 0.3);
  const auto e = embed(g, v);
  const auto one = skater_partition(g, e, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.regions[0].size(), 12u);
  EXPECT_NEAR(one.ssd, oracle_ssd(as_double(e), std::vector<std::uint32_t>(12, 0), 1), 1e-9);
  const auto all = skater_partition(g, e, 12);
  ASSERT_EQ(all.size(), 12u);
  EXPECT_NEAR(all.ssd, 0.0, 1e-12);
  for (const auto& r : all.regions) EXPECT_EQ(r.size(), 1u);
}

TEST(Skater, Errors) {
  const TileGrid g(8, 2, 2);
  std::mt19937_64 rng(1);
  const auto e = embed(g, block_embeddings(g, [](int, int) { return 0; }, rng, 0.1));
  EXPECT_EQ(code_of([&] { skater_partition(g, e, 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { skater_partition(g, e, 5); }), ErrorCode::InvalidArgument);
  auto short_e = e;
  short_e.pop_back();
  EXPECT_EQ(code_of([&] { skater_partition(g, short_e, 2); }), ErrorCode::DimMismatch);
}

TEST(Skater, RecoversHalvesAndMatchesExhaustiveSearch) {
  const TileGrid g(8, 4, 4);
  std::mt19937_64 rng(2);
  const std::vector<std::function<int(int, int)>> layouts = {
      [](int, int c) { return c < 2 ? 0 : 1; },
      [](int r, int) { return r < 2 ? 0 : 1; },
      [](int r, int c) { return r < 2 && c < 2 ? 0 : 1; },
      [](int r, int c) { return c == 3 || (r == 3 && c >= 1) ? 1 : 0; },
  };
  for (std::size_t l = 0; l < layouts.size(); ++l) {
    for (double noise : {0.0, 0.02}) {
      const auto e = embed(g, block_embeddings(g, layouts[l], rng, noise));
      const auto part = skater_partition(g, e, 2);
      std::vector<std::uint32_t> planted;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) planted.push_back(static_cast<std::uint32_t>(layouts[l](r, c)));
      EXPECT_EQ(relabel_by_first(part.region_of), relabel_by_first(planted)) << "layout " << l;
      const auto best = exhaustive_two_partition(4, 4, as_double(e));
      EXPECT_NEAR(part.ssd, best.ssd, 1e-9) << "layout " << l;
      EXPECT_EQ(relabel_by_first(part.region_of), relabel_by_first(best.label)) << "layout " << l;
    }
  }
}

TEST(Skater, MonotoneSsdAndConnectedRegions) {
  std::mt19937_64 rng(3);
  for (auto [rows, cols] : {std::pair{4, 4}, std::pair{3, 5}, std::pair{1, 7}, std::pair{5, 5}}) {
    const TileGrid g(8, rows, cols);
    std::normal_distribution<double> n;
    std::vector<std::vector<double>> v(static_cast<std::size_t>(rows * cols), std::vector<double>(5));
    for (auto& row : v)
      for (auto& x : row) x = n(rng);
    const auto e = embed(g, v);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t p = 1; p <= g.tile_count(); ++p) {
      const auto part = skater_partition(g, e, p);
      ASSERT_EQ(part.size(), p);
      ASSERT_LE(part.ssd, prev + 1e-9) << "P=" << p;
      ASSERT_NEAR(part.ssd, oracle_ssd(as_double(e), part.region_of, p), 1e-9);
      prev = part.ssd;
      std::size_t covered = 0;
      for (std::uint32_t r = 0; r < p; ++r) {
        ASSERT_TRUE(oracle_connected(rows, cols, part.region_of, r)) << "P=" << p << " region " << r;
        covered += part.regions[r].size();
        ASSERT_TRUE(std::is_sorted(part.regions[r].begin(), part.regions[r].end()));
        for (const auto& t : part.regions[r]) ASSERT_EQ(part.region_of[static_cast<std::size_t>(g.index(t))], r);
      }
      ASSERT_EQ(covered, g.tile_count());
      for (std::uint32_t r = 1; r < p; ++r) ASSERT_LT(part.regions[r - 1].front(), part.regions[r].front());
    }
  }
}

TEST(Skater, DefaultRegionCount) {
  EXPECT_EQ(default_region_count(TileGrid(8, 10, 10)), 1u);
  EXPECT_EQ(default_region_count(TileGrid(8, 20, 20)), 1u);
  EXPECT_EQ(default_region_count(TileGrid(8, 20, 21)), 2u);
}

TEST(Skater, PartitionFileRoundTrip) {
  const TileGrid g(8, 3, 3);
  std::mt19937_64 rng(4);
  const auto part = skater_partition(g, embed(g, block_embeddings(g, [](int r, int) { return r == 0 ? 0 : 1; }, rng, 0.05)), 3);
  TempDir dir("part");
  save_partition(dir / "p.json", part, g);
  TileGrid back_grid;
  const auto back = load_partition(dir / "p.json", &back_grid);
  EXPECT_EQ(back.regions, part.regions);
  EXPECT_EQ(back.region_of, part.region_of);
  EXPECT_DOUBLE_EQ(back.ssd, part.ssd);
  EXPECT_EQ(back_grid.rows, 3);
}

// ---------------------------------------------------------------------------
// sampling

namespace {

RegionPartition strips(const TileGrid& g) {
  // one region per grid row
  RegionPartition p;
  p.region_of.resize(g.tile_count());
  for (std::int32_t r = 0; r < g.rows; ++r) {
    p.regions.emplace_back();
    for (std::int32_t c = 0; c < g.cols; ++c) {
      p.regions.back().push_back({r, c});
      p.region_of[static_cast<std::size_t>(g.index({r, c}))] = static_cast<std::uint32_t>(r);
    }
  }
  return p;
}

}  // namespace

TEST(Sampling, ZeroAndDeterminism) {
  const TileGrid g(8, 4, 10);
  const auto p = strips(g);
  EXPECT_TRUE(stratified_sample(p, 0, 1).tiles.empty());
  const auto a = stratified_sample(p, 3, 99), b = stratified_sample(p, 3, 99);
  EXPECT_EQ(a.tiles, b.tiles);
  EXPECT_EQ(a.tiles.size(), 12u);
  EXPECT_TRUE(std::is_sorted(a.tiles.begin(), a.tiles.end()));
  EXPECT_NE(stratified_sample(p, 3, 100).tiles, a.tiles);
}

TEST(Sampling, PerRegionCountsAndShortRegions) {
  const TileGrid g(8, 3, 4);
  const auto p = strips(g);
  const auto s = stratified_sample(p, 5, 7);
  EXPECT_EQ(s.tiles.size(), 12u);
  EXPECT_EQ(s.short_regions, (std::vector<std::uint32_t>{0, 1, 2}));
  const auto two = stratified_sample(p, 2, 7);
  for (std::int32_t r = 0; r < 3; ++r) {
    EXPECT_EQ(std::count_if(two.tiles.begin(), two.tiles.end(), [&](const TilePos& t) { return t.row == r; }), 2);
  }
  EXPECT_TRUE(two.short_regions.empty());
}

TEST(Sampling, RoundsAreDisjointOverManySeeds) {
  const TileGrid g(8, 5, 8);
  const auto p = strips(g);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r1 = stratified_sample(p, 3, seed);
    const std::set<TilePos> ex(r1.tiles.begin(), r1.tiles.end());
    ASSERT_EQ(ex.size(), r1.tiles.size());
    const auto r2 = stratified_sample(p, 3, seed + 1000, ex);
    std::set<TilePos> both = ex;
    for (const auto& t : r2.tiles) ASSERT_TRUE(both.insert(t).second) << "seed " << seed;
    ASSERT_EQ(r2.tiles.size(), 15u);
    const auto r3 = stratified_sample(p, 3, seed + 2000, both);
    ASSERT_EQ(r3.tiles.size(), 10u);  // 2 left per row
    for (const auto& t : r3.tiles) ASSERT_FALSE(both.contains(t));
  }
}

TEST(Sampling, RoughlyUniform) {
  const TileGrid g(8, 1, 10);
  const auto p = strips(g);
  std::vector<int> hits(10, 0);
  const int trials = 5000;
  for (int s = 0; s < trials; ++s) {
    for (const auto& t : stratified_sample(p, 2, static_cast<std::uint64_t>(s)).tiles) ++hits[static_cast<std::size_t>(t.col)];
  }
  // expected 1000 per tile, binomial sd ~28
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

TEST(Sampling, Splitmix64KnownValues) {
  // reference outputs of the splitmix64 finalizer
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(1), 0x910a2dec89025cc1ULL);
}

// ---------------------------------------------------------------------------
// draft and refinement

TEST(Draft, SnapsMaskToMajority) {
  LabelRaster pred(10, 10, 0);
  // 10-pixel mask: 7 pixels class 2, 3 pixels class 6
  for (int x = 0; x < 10; ++x) pred.data[static_cast<std::size_t>(20 + x)] = x < 7 ? 2 : 6;
  const auto out = draft_annotation(pred, {rect_mask(0, 2, 10, 1)});
  int changed = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) changed += out.data[i] != pred.data[i];
  EXPECT_EQ(changed, 3);
  for (int x = 0; x < 10; ++x) EXPECT_EQ(out.at(x, 2), 2);
}

TEST(Draft, FixedPointsAndIdempotence) {
  std::mt19937_64 rng(5);
  LabelRaster pred(20, 20);
  for (auto& v : pred.data) v = static_cast<ClassId>(rng() % 8);
  EXPECT_EQ(draft_annotation(pred, {}), pred);
  std::vector<RunLengthMask> masks = {rect_mask(0, 0, 5, 5), rect_mask(6, 6, 8, 3), rect_mask(15, 0, 5, 20)};
  const auto once = draft_annotation(pred, masks);
  EXPECT_EQ(draft_annotation(once, masks), once);
  LabelRaster uniform(20, 20, 4);
  EXPECT_EQ(draft_annotation(uniform, masks), uniform);
}

TEST(Draft, MasksForTileClipsAndTranslates) {
  const TileGrid g(16, 2, 2);
  std::vector<MaskRecord> masks = {MaskRecord::make(1, {0, 0}, Scale::Fused, rect_mask(12, 12, 8, 2)),
                                   MaskRecord::make(2, {0, 0}, Scale::Fused, rect_mask(0, 0, 2, 2))};
  const auto local = masks_for_tile(masks, g, {0, 1});
  ASSERT_EQ(local.size(), 1u);
  EXPECT_EQ(oracle_pixels(local[0]), oracle_pixels(rect_mask(0, 12, 4, 2)));
}

TEST(Refine, EditsInOrder) {
  const auto schema = ClassSchema::oem8();
  LabelRaster draft(10, 10, 1);
  EXPECT_EQ(apply_refinement(draft, {}, schema), draft);
  const auto one = apply_refinement(draft, {{BBox{2, 3, 4, 2}, 5}}, schema);
  int changed = 0;
  for (std::size_t i = 0; i < draft.data.size(); ++i) changed += one.data[i] != draft.data[i];
  EXPECT_EQ(changed, 8);
  const auto two = apply_refinement(draft, {{BBox{0, 0, 4, 4}, 5}, {rect_mask(2, 2, 4, 4), 6}}, schema);
  EXPECT_EQ(two.at(3, 3), 6);
  EXPECT_EQ(two.at(1, 1), 5);
  EXPECT_EQ(two.at(5, 5), 6);
  EXPECT_EQ(code_of([&] { apply_refinement(draft, {{BBox{0, 0, 1, 1}, 8}}, schema); }), ErrorCode::InvalidClass);
  EXPECT_EQ(code_of([&] { apply_refinement(draft, {{BBox{8, 8, 4, 4}, 1}}, schema); }), ErrorCode::OutOfBounds);
}

TEST(Refine, ReadEdits) {
  TempDir dir("edits");
  {
    std::ofstream out(dir / "e.json");
    out << R"({"edits":[{"rect":[1,2,3,4],"class":2},{"bbox":[0,0,2,1],"rle":[0,2],"class":3}]})";
  }
  const auto edits = read_edits(dir / "e.json");
  ASSERT_EQ(edits.size(), 2u);
  EXPECT_EQ(std::get<BBox>(edits[0].region).h, 4);
  EXPECT_EQ(std::get<RunLengthMask>(edits[1].region).area(), 2u);
  EXPECT_EQ(edits[1].class_id, 3);
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"edits":[{"class":2}]})";
  }
  EXPECT_EQ(code_of([&] { read_edits(dir / "bad.json"); }), ErrorCode::Parse);
}

TEST(Rounds, BookkeepingAndExclusion) {
  TempDir dir("rounds");
  RefinementRound r1;
  r1.round = 1;
  r1.seed = 7;
  r1.n_per_region = 2;
  r1.sampled_tiles = {{0, 1}, {2, 2}};
  for (const auto& t : r1.sampled_tiles) r1.status[t] = TileStatus::Drafted;
  r1.mark_refined({2, 2});
  EXPECT_EQ(r1.status.at({2, 2}), TileStatus::Refined);
  EXPECT_EQ(code_of([&] { r1.mark_refined({5, 5}); }), ErrorCode::InvalidArgument);
  r1.save(round_manifest_path(dir.path(), 1));
  const auto back = RefinementRound::load(round_manifest_path(dir.path(), 1));
  EXPECT_EQ(back.sampled_tiles, r1.sampled_tiles);
  EXPECT_EQ(back.status, r1.status);
  EXPECT_EQ(back.seed, 7u);

  RefinementRound r2 = r1;
  r2.round = 2;
  r2.sampled_tiles = {{1, 1}};
  r2.status = {{{1, 1}, TileStatus::Drafted}};
  r2.save(round_manifest_path(dir.path(), 2));
  EXPECT_EQ(previously_sampled(dir.path(), 2), (std::set<TilePos>{{0, 1}, {2, 2}}));
  EXPECT_EQ(previously_sampled(dir.path(), 3), (std::set<TilePos>{{0, 1}, {1, 1}, {2, 2}}));
  EXPECT_TRUE(previously_sampled(dir.path(), 1).empty());
  EXPECT_EQ(round_manifest_path(dir.path(), 12).filename(), "round_12.json");
}
