#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "mcae/error.hpp"
#include "mcae/image_io.hpp"
#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"
#include "mcae/rle.hpp"
#include "mcae/schema.hpp"
#include "mcae/tile_grid.hpp"
#include "test_support.hpp"

using namespace mcae;
using namespace mcae::testing;

// ---------------------------------------------------------------------------
// ClassSchema / LabelRaster

TEST(ClassSchema, Oem8Order) {
  const ClassSchema s = ClassSchema::oem8();
  ASSERT_EQ(s.size(), 8u);
  const std::vector<std::string> names = {"bareland", "rangeland", "developed space", "road",
                                          "tree",     "water",     "agricultural land", "building"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(s.at(static_cast<ClassId>(i)).name, names[i]);
    EXPECT_EQ(s.at(static_cast<ClassId>(i)).id, i);
  }
  EXPECT_FALSE(s.valid(kIgnoreId));
}

TEST(ClassSchema, Oem9AddsOthers) {
  const ClassSchema s = ClassSchema::oem9();
  ASSERT_EQ(s.size(), 9u);
  EXPECT_EQ(s.at(8).name, "others");
  EXPECT_EQ(s.find("others"), std::optional<ClassId>(8));
}

TEST(ClassSchema, RejectsBadClassLists) {
  EXPECT_EQ(code_of([] { ClassSchema("x", {{0, "a", {}}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([] { ClassSchema("x", {{0, "a", {}}, {2, "b", {}}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([] { ClassSchema("x", {{0, "a", {}}, {1, "a", {}}}); }), ErrorCode::Config);
  EXPECT_EQ(code_of([] { ClassSchema::by_name("nope"); }), ErrorCode::Config);
}

TEST(LabelRaster, ValidateRejectsUnknownClass) {
  LabelRaster r(4, 4, 0);
  r.at(1, 1) = kIgnoreId;
  EXPECT_NO_THROW(r.validate(ClassSchema::oem8()));
  r.at(2, 2) = 8;
  EXPECT_EQ(code_of([&] { r.validate(ClassSchema::oem8()); }), ErrorCode::InvalidClass);
  EXPECT_NO_THROW(r.validate(ClassSchema::oem9()));
}

TEST(LabelRaster, CropCopiesWindow) {
  LabelRaster r(5, 4, 0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) r.at(x, y) = static_cast<ClassId>(x + y);
  }
  const LabelRaster c = r.crop(1, 2, 3, 2);
  ASSERT_EQ(c.width, 3);
  ASSERT_EQ(c.height, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) EXPECT_EQ(c.at(x, y), r.at(x + 1, y + 2));
  }
}

// ---------------------------------------------------------------------------
// RunLengthMask

TEST(RleEncode, FullBlock) {
  Bitmap bm(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) bm.set(x, y);
  }
  const RunLengthMask m = rle_encode(bm);
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{0, 16}));
  EXPECT_EQ(m.area(), 16u);
}

TEST(RleEncode, SinglePixel) {
  Bitmap bm(2, 2);
  bm.set(0, 0);
  const RunLengthMask m = rle_encode(bm);
  EXPECT_EQ(m.runs(), (std::vector<std::uint32_t>{0, 1, 3}));
  EXPECT_EQ(m.area(), 1u);
}

TEST(RleEncode, EmptyForegroundThrows) {
  Bitmap bm(3, 3);
  EXPECT_EQ(code_of([&] { rle_encode(bm); }), ErrorCode::EmptyMask);
}

TEST(RleEncode, RandomRoundTripMatchesPixelOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Bitmap bm = random_bitmap(rng, 8, 8, 0.45);
    const RunLengthMask m = rle_encode(bm, 3, 5);
    const Bitmap back = rle_decode(m);
    ASSERT_EQ(back.width, 8);
    ASSERT_EQ(back.height, 8);
    PixelSet expect;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        EXPECT_EQ(back.test(x, y), bm.test(x, y)) << "trial " << trial << " at " << x << "," << y;
        if (bm.test(x, y)) expect.emplace(x + 3, y + 5);
      }
    }
    EXPECT_EQ(oracle_pixels(m), expect);
    std::uint64_t sum = 0;
    for (auto r : m.runs()) sum += r;
    EXPECT_EQ(sum, 64u);
  }
}

TEST(RunLengthMask, RejectsNonCanonicalRuns) {
  EXPECT_EQ(code_of([] { RunLengthMask({0, 0, 2, 2}, {0, 2, 0, 2}); }), ErrorCode::InvalidRle);
  EXPECT_EQ(code_of([] { RunLengthMask({0, 0, 2, 2}, {0, 3}); }), ErrorCode::InvalidRle);
  EXPECT_EQ(code_of([] { RunLengthMask({0, 0, 0, 2}, {0}); }), ErrorCode::InvalidRle);
  EXPECT_EQ(code_of([] { RunLengthMask({0, 0, 2, 2}, {4}); }), ErrorCode::EmptyMask);
  EXPECT_EQ(code_of([] { RunLengthMask({0, 0, 2, 2}, {}); }), ErrorCode::InvalidRle);
}

TEST(RunLengthMask, SpansRoundTrip) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const PixelSet px = random_blob(rng, 40, 12, 4);
    const RunLengthMask m = mask_from_pixels(px);
    EXPECT_EQ(oracle_pixels(m.spans()), px);
    EXPECT_EQ(RunLengthMask::from_spans(m.spans()), m);
    EXPECT_EQ(m.area(), px.size());
  }
}

// ---------------------------------------------------------------------------
// SpanSet algebra against the pixel oracle

TEST(SpanSet, SetAlgebraMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const PixelSet a = random_blob(rng, 24, 10), b = random_blob(rng, 24, 10);
    const SpanSet sa = mask_from_pixels(a).spans(), sb = mask_from_pixels(b).spans();
    EXPECT_EQ(oracle_pixels(sa.intersect(sb)), set_intersection(a, b));
    EXPECT_EQ(oracle_pixels(sa.subtract(sb)), set_difference(a, b));
    EXPECT_EQ(oracle_pixels(sa.unite(sb)), set_union(a, b));
    EXPECT_EQ(sa.intersection_area(sb), set_intersection(a, b).size());
    EXPECT_EQ(sa.intersects(sb), !set_intersection(a, b).empty());
  }
}

TEST(SpanSet, PerimeterMatchesEdgeCount) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const PixelSet a = random_blob(rng, 20, 8);
    std::uint64_t edges = 0;
    for (auto [x, y] : a) {
      for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        if (!a.contains({x + dx, y + dy})) ++edges;
      }
    }
    EXPECT_EQ(mask_from_pixels(a).spans().perimeter(), edges);
  }
}

TEST(SpanSet, ComponentsMatchFloodFill) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const PixelSet a = random_blob(rng, 30, 6, 5);
    // Oracle: flood fill over the pixel set.
    PixelSet left = a;
    std::set<PixelSet> expect;
    while (!left.empty()) {
      PixelSet comp;
      std::vector<std::pair<std::int64_t, std::int64_t>> stack{*left.begin()};
      left.erase(left.begin());
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        comp.insert(p);
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          auto it = left.find({p.first + dx, p.second + dy});
          if (it != left.end()) {
            stack.push_back(*it);
            left.erase(it);
          }
        }
      }
      expect.insert(comp);
    }
    std::set<PixelSet> got;
    for (const auto& c : mask_from_pixels(a).spans().components()) got.insert(oracle_pixels(c));
    EXPECT_EQ(got, expect);
  }
}

TEST(SpanSet, Upsample2xQuadruplesArea) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const PixelSet a = random_blob(rng, 16, 6);
    const RunLengthMask up = upsample2x(mask_from_pixels(a));
    PixelSet expect;
    for (auto [x, y] : a) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) expect.emplace(2 * x + dx, 2 * y + dy);
      }
    }
    EXPECT_EQ(oracle_pixels(up), expect);
  }
}

// ---------------------------------------------------------------------------
// mask_relation

TEST(MaskRelation, IdenticalMasksAreEqual) {
  const RunLengthMask m = rect_mask(2, 3, 5, 4);
  const auto r = mask_relation(m, m);
  EXPECT_EQ(r.relation, Relation::Equal);
  EXPECT_EQ(r.intersection_area, 20u);
}

TEST(MaskRelation, DistinctPixelsAreDisjoint) {
  const auto r = mask_relation(rect_mask(0, 0, 1, 1), rect_mask(5, 5, 1, 1));
  EXPECT_EQ(r.relation, Relation::Disjoint);
  EXPECT_EQ(r.intersection_area, 0u);
}

TEST(MaskRelation, RandomPairsMatchOracleAndSymmetry) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const PixelSet a = random_blob(rng, 16, 8, 2);
    PixelSet b = (trial % 5 == 0) ? a : random_blob(rng, 16, 8, 2);
    if (trial % 7 == 0) b = set_union(a, b);  // force a inside b
    const auto inter = set_intersection(a, b);
    Relation expect;
    if (inter.empty()) expect = Relation::Disjoint;
    else if (a == b) expect = Relation::Equal;
    else if (inter.size() == a.size()) expect = Relation::AInsideB;
    else if (inter.size() == b.size()) expect = Relation::BInsideA;
    else expect = Relation::Partial;

    const RunLengthMask ma = mask_from_pixels(a), mb = mask_from_pixels(b);
    const auto r = mask_relation(ma, mb);
    EXPECT_EQ(r.relation, expect) << "trial " << trial;
    EXPECT_EQ(r.intersection_area, inter.size());
    EXPECT_LE(r.intersection_area, std::min(ma.area(), mb.area()));

    const auto s = mask_relation(mb, ma);
    EXPECT_EQ(s.intersection_area, r.intersection_area);
    const Relation mirrored = r.relation == Relation::AInsideB   ? Relation::BInsideA
                              : r.relation == Relation::BInsideA ? Relation::AInsideB
                                                                 : r.relation;
    EXPECT_EQ(s.relation, mirrored);
  }
}

// ---------------------------------------------------------------------------
// TileGrid / global_frame

TEST(TileGrid, RejectsBadParameters) {
  EXPECT_EQ(code_of([] { TileGrid(0, 1, 1); }), ErrorCode::Config);
  EXPECT_EQ(code_of([] { TileGrid(16, 1, 1, 1.0); }), ErrorCode::Config);
  EXPECT_EQ(code_of([] { TileGrid(16, 1, 1, -0.1); }), ErrorCode::Config);
}

TEST(TileGrid, HalfOverlapStride) {
  const TileGrid g(1024, 3, 3, 0.5);
  EXPECT_EQ(g.stride(), 512);
  EXPECT_EQ(g.tile_box({0, 1}).x0, 512);
  EXPECT_EQ(g.tile_box({2, 0}).y0, 1024);
  EXPECT_EQ(g.mosaic_width(), 2048);
}

TEST(GlobalFrame, OriginTileUnchanged) {
  const TileGrid g(256, 2, 2);
  const auto rec = MaskRecord::make(1, {0, 0}, Scale::Fine, rect_mask(5, 6, 3, 2));
  EXPECT_EQ(global_frame(rec, g).bbox(), (BBox{5, 6, 3, 2}));
}

TEST(GlobalFrame, HalfOverlapOffset) {
  const TileGrid g(1024, 2, 2, 0.5);
  const auto rec = MaskRecord::make(1, {0, 1}, Scale::Fine, rect_mask(5, 6, 3, 2));
  EXPECT_EQ(global_frame(rec, g).bbox(), (BBox{517, 6, 3, 2}));
}

TEST(GlobalFrame, TileOutOfRangeThrows) {
  const TileGrid g(256, 2, 2);
  const auto rec = MaskRecord::make(1, {2, 0}, Scale::Fine, rect_mask(0, 0, 1, 1));
  EXPECT_EQ(code_of([&] { global_frame(rec, g); }), ErrorCode::TileOutOfRange);
}

TEST(GlobalFrame, PreservesAreaAndPixelsEverywhere) {
  std::mt19937_64 rng(13);
  const TileGrid g(64, 4, 5, 0.5);
  for (std::int32_t r = 0; r < g.rows; ++r) {
    for (std::int32_t c = 0; c < g.cols; ++c) {
      const PixelSet px = random_blob(rng, 64, 20);
      const auto rec = MaskRecord::make(1, {r, c}, Scale::Fine, mask_from_pixels(px));
      const RunLengthMask gm = global_frame(rec, g);
      EXPECT_EQ(gm.area(), rec.area_px);
      EXPECT_EQ(oracle_pixels(gm), shifted(px, c * 32, r * 32));
    }
  }
}

TEST(AnchorToGrid, UsesCentroidTile) {
  const TileGrid g(100, 3, 3);
  const auto rec = anchor_to_grid(9, Scale::Fused, rect_mask(150, 220, 10, 10), g);
  EXPECT_EQ(rec.tile, (TilePos{2, 1}));
  EXPECT_EQ(rec.mask.bbox(), (BBox{50, 20, 10, 10}));
  EXPECT_EQ(global_frame(rec, g).bbox(), (BBox{150, 220, 10, 10}));
}

// ---------------------------------------------------------------------------
// Interchange formats

TEST(MaskSetFile, RoundTrip) {
  TempDir dir("maskset");
  std::mt19937_64 rng(14);
  std::vector<MaskRecord> recs;
  for (std::uint64_t id = 1; id <= 20; ++id) {
    recs.push_back(MaskRecord::make(id, {static_cast<std::int32_t>(id % 3), static_cast<std::int32_t>(id % 2)},
                                    id % 2 ? Scale::Fine : Scale::Coarse, mask_from_pixels(random_blob(rng, 30, 9))));
  }
  write_mask_set(dir / "m.jsonl", recs);
  const auto back = read_mask_set(dir / "m.jsonl");
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].id, recs[i].id);
    EXPECT_EQ(back[i].tile, recs[i].tile);
    EXPECT_EQ(back[i].scale, recs[i].scale);
    EXPECT_EQ(back[i].mask, recs[i].mask);
    EXPECT_EQ(back[i].area_px, recs[i].area_px);
  }
}

TEST(MaskSetFile, LineFormat) {
  const auto rec = MaskRecord::make(7, {1, 2}, Scale::Fused, RunLengthMask({3, 4, 2, 2}, {0, 1, 3}));
  EXPECT_EQ(mask_record_to_json(rec), R"({"bbox":[3,4,2,2],"id":7,"rle":[0,1,3],"scale":"fused","tile":[1,2]})");
  const auto back = mask_record_from_json(R"({"id":7,"tile":[1,2],"scale":"fused","bbox":[3,4,2,2],"rle":[0,1,3]})");
  EXPECT_EQ(back.mask, rec.mask);
  EXPECT_EQ(back.area_px, 1u);
}

TEST(MaskSetFile, Errors) {
  TempDir dir("maskset_err");
  EXPECT_EQ(code_of([] { mask_record_from_json("{\"id\":1}"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { mask_record_from_json(R"({"id":1,"tile":[0,0],"scale":"odd","bbox":[0,0,1,1],"rle":[0,1]})"); }),
            ErrorCode::Parse);
  EXPECT_EQ(code_of([] { mask_record_from_json(R"({"id":1,"tile":[0,0],"scale":"fine","bbox":[0,0,2,2],"rle":[0,3]})"); }),
            ErrorCode::InvalidRle);
  {
    std::ofstream out(dir / "dup.jsonl");
    out << R"({"id":1,"tile":[0,0],"scale":"fine","bbox":[0,0,1,1],"rle":[0,1]})" << '\n'
        << R"({"id":1,"tile":[0,0],"scale":"fine","bbox":[2,0,1,1],"rle":[0,1]})" << '\n';
  }
  EXPECT_EQ(code_of([&] { read_mask_set(dir / "dup.jsonl"); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { read_mask_set(dir / "missing.jsonl"); }), ErrorCode::Io);
}

TEST(LabelRasterFile, RoundTripWithSidecar) {
  TempDir dir("raster");
  LabelRaster r(7, 5, 0, 0.6);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) r.at(x, y) = static_cast<ClassId>((x * 3 + y) % 9);
  }
  r.at(0, 0) = kIgnoreId;
  write_label_raster(dir / "r.png", r, "oem9");
  const LabelRaster back = read_label_raster(dir / "r.png");
  EXPECT_EQ(back, r);
  EXPECT_EQ(read_schema_name(dir / "r.png", "oem8"), "oem9");
  EXPECT_EQ(encode_png(r), read_bytes(dir / "r.png"));
}

TEST(RgbFile, RoundTrip) {
  TempDir dir("rgb");
  RgbImage img(6, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) img.set(x, y, {static_cast<std::uint8_t>(x * 40), static_cast<std::uint8_t>(y * 60), 7});
  }
  write_rgb_png(dir / "i.png", img);
  EXPECT_EQ(read_rgb_png(dir / "i.png"), img);
}
