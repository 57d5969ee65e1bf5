#include "mcae/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "mcae/curation.hpp"
#include "mcae/error.hpp"
#include "mcae/image_io.hpp"

namespace mcae {

using nlohmann::json;

namespace {

constexpr std::int32_t kGap = 3;

// Class colour at the centre of hue bin c % 8.
Rgb class_colour(ClassId c) {
  const double hue = 22.5 + 45.0 * (c % 8);
  const double s = 0.7, v = 0.8;
  const double ch = v * s;
  const double hp = hue / 60.0;
  const double x = ch * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = ch; g = x; break;
    case 1: r = x; g = ch; break;
    case 2: g = ch; b = x; break;
    case 3: g = x; b = ch; break;
    case 4: r = x; b = ch; break;
    default: r = ch; b = x; break;
  }
  const double m = v - ch;
  auto q = [&](double t) { return static_cast<std::uint8_t>(std::lround((t + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

std::uint8_t jitter(std::uint8_t base, std::uint64_t h) {
  const int d = static_cast<int>(h % 13) - 6;
  return static_cast<std::uint8_t>(std::clamp(base + d, 0, 255));
}

SpanSet ellipse(std::int32_t x0, std::int32_t y0, std::int32_t w, std::int32_t h) {
  std::vector<Span> spans;
  const double cx = x0 + w / 2.0, cy = y0 + h / 2.0, rx = w / 2.0, ry = h / 2.0;
  for (std::int32_t y = y0; y < y0 + h; ++y) {
    const double dy = (y + 0.5 - cy) / ry;
    const double half = rx * std::sqrt(std::max(0.0, 1.0 - dy * dy));
    const auto a = static_cast<std::int32_t>(std::ceil(cx - half - 0.5));
    const auto b = static_cast<std::int32_t>(std::floor(cx + half - 0.5)) + 1;
    if (b > a) spans.push_back({y, std::max(a, x0), std::min(b, x0 + w)});
  }
  return SpanSet(std::move(spans));
}

struct Placer {
  std::mt19937_64 rng;
  std::vector<BBox> taken;

  std::int32_t uniform(std::int32_t lo, std::int32_t hi) {
    return std::uniform_int_distribution<std::int32_t>(lo, hi)(rng);
  }

  bool free(const BBox& b) const {
    for (const BBox& t : taken) {
      if (b.x0 < t.x1() + kGap && t.x0 < b.x1() + kGap && b.y0 < t.y1() + kGap && t.y0 < b.y1() + kGap) return false;
    }
    return true;
  }

  // Random box of the given size range inside region, clear of taken boxes.
  std::optional<BBox> place(const BBox& region, std::int32_t min_side, std::int32_t max_side, int attempts = 200) {
    for (int i = 0; i < attempts; ++i) {
      const std::int32_t w = uniform(min_side, max_side), h = uniform(min_side, max_side);
      if (w > region.w || h > region.h) continue;
      const BBox b{uniform(region.x0, static_cast<std::int32_t>(region.x1()) - w),
                     uniform(region.y0, static_cast<std::int32_t>(region.y1()) - h), w, h};
      if (free(b)) {
        taken.push_back(b);
        return b;
      }
    }
    return std::nullopt;
  }

  SpanSet shape(const BBox& b) { return uniform(0, 1) ? SpanSet::rect(b.x0, b.y0, b.w, b.h) : ellipse(b.x0, b.y0, b.w, b.h); }
};

BBox tiles_box(const TileGrid& grid, std::int32_t r0, std::int32_t c0, std::int32_t r1, std::int32_t c1) {
  const BBox a = grid.tile_box({r0, c0});
  const BBox b = grid.tile_box({r1, c1});
  return {a.x0, a.y0, static_cast<std::int32_t>(b.x1() - a.x0), static_cast<std::int32_t>(b.y1() - a.y0)};
}

bool in_window(std::int32_t r, std::int32_t c, std::int32_t r0, std::int32_t c0, std::int32_t span) {
  return r >= r0 && r < r0 + span && c >= c0 && c < c0 + span;
}

}  // namespace

std::string_view to_string(PlantKind k) {
  switch (k) {
    case PlantKind::Colony: return "colony";
    case PlantKind::Sparse: return "sparse";
    case PlantKind::Scatter: return "scatter";
    case PlantKind::NestedInner: return "nested_inner";
    case PlantKind::NestedOuter: return "nested_outer";
  }
  return "scatter";
}

PlantKind parse_plant_kind(std::string_view s) {
  for (auto k : {PlantKind::Colony, PlantKind::Sparse, PlantKind::Scatter, PlantKind::NestedInner, PlantKind::NestedOuter}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::Parse, "unknown plant kind '" + std::string(s) + "'");
}

void SceneSpec::validate() const {
  if (rows < 2 || cols < 2) fail(ErrorCode::InvalidArgument, "scene needs at least 2x2 tiles");
  if (tile_size < 64 || tile_size % 4 != 0) fail(ErrorCode::InvalidArgument, "scene tile_size must be a multiple of 4, >= 64");
  if (!(pixel_size_m > 0)) fail(ErrorCode::InvalidArgument, "pixel_size_m must be positive");
  if (background >= 8 || colony_class >= 8 || sparse_class >= 8 || background == colony_class ||
      background == sparse_class || colony_class == sparse_class) {
    fail(ErrorCode::InvalidArgument, "scene classes must be distinct oem8 ids");
  }
  if (prediction_noise < 0 || prediction_noise >= 0.5) fail(ErrorCode::InvalidArgument, "prediction_noise must be in [0, 0.5)");
  if (planted_feature_dim < 2) fail(ErrorCode::InvalidArgument, "planted_feature_dim must be >= 2");
}

std::vector<MaskRecord> SyntheticScene::planted_records() const {
  std::vector<MaskRecord> out;
  const TileGrid grid = spec.grid();
  for (const auto& p : planted) out.push_back(anchor_to_grid(p.id, Scale::Fused, RunLengthMask::from_spans(p.pixels), grid));
  sort_canonical(out);
  return out;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const TileGrid grid = spec.grid();
  const TileGrid fine_grid = spec.fine_grid();
  const std::int32_t T = spec.tile_size;
  const std::int32_t W = grid.mosaic_width(), H = grid.mosaic_height();

  SyntheticScene scene;
  scene.spec = spec;
  Placer placer{std::mt19937_64(splitmix64(spec.seed)), {}};

  std::vector<ClassId> scatter_classes;
  for (ClassId c = 0; c < 8; ++c) {
    if (c != spec.background && c != spec.colony_class && c != spec.sparse_class) scatter_classes.push_back(c);
  }
  auto add = [&](ClassId cls, PlantKind kind, SpanSet px) {
    scene.planted.push_back({scene.planted.size() + 1, cls, kind, std::move(px), 0, 0});
  };

  // Dense colony in the first small window.
  const std::int32_t cw = std::min({3, spec.rows, spec.cols});
  const BBox colony_box = tiles_box(grid, 0, 0, cw - 1, cw - 1);
  const std::int32_t small_side = std::max(6, T / 12), big_side = std::max(10, T / 6);
  for (std::uint32_t i = 0; i < spec.colony_size; ++i) {
    const auto b = placer.place(colony_box, small_side, big_side, 2000);
    if (!b) fail(ErrorCode::InvalidArgument, "colony does not fit the scene");
    add(spec.colony_class, PlantKind::Colony, placer.shape(*b));
  }

  // Sparse colony: one object per small-window cell inside the large window at
  // (5,5).
  const bool has_sparse = spec.rows >= 10 && spec.cols >= 10;
  if (has_sparse) {
    const std::array<std::pair<std::int32_t, std::int32_t>, 9> cells = {
        {{5, 5}, {5, 7}, {5, 9}, {7, 5}, {7, 7}, {7, 9}, {9, 5}, {9, 7}, {9, 9}}};
    for (std::uint32_t i = 0; i < std::min<std::uint32_t>(spec.sparse_size, 9); ++i) {
      const BBox tile = grid.tile_box({cells[i].first, cells[i].second});
      const BBox inner{tile.x0 + kGap, tile.y0 + kGap, tile.w - 2 * kGap, tile.h - 2 * kGap};
      const auto b = placer.place(inner, small_side, big_side, 2000);
      if (!b) fail(ErrorCode::InvalidArgument, "sparse colony does not fit the scene");
      add(spec.sparse_class, PlantKind::Sparse, placer.shape(*b));
    }
  }

  auto reserved = [&](std::int32_t r, std::int32_t c) {
    (void)has_sparse;
    return in_window(r, c, 0, 0, cw);
  };

  // Nested coarse fields with a fine object of another class inside.
  for (std::int32_t r = 0; r < spec.rows; ++r) {
    for (std::int32_t c = 0; c < spec.cols; ++c) {
      if (reserved(r, c) || (r + 2 * c) % 4 != 1) continue;
      const BBox tile = grid.tile_box({r, c});
      const std::int32_t fw = 2 * placer.uniform(T / 4, T * 3 / 8);
      const std::int32_t fh = 2 * placer.uniform(T / 4, T * 3 / 8);
      const std::int32_t fx = tile.x0 + 2 * placer.uniform(kGap, (T - fw) / 2 - kGap);
      const std::int32_t fy = tile.y0 + 2 * placer.uniform(kGap, (T - fh) / 2 - kGap);
      const BBox field{fx, fy, fw, fh};
      if (!placer.free(field)) continue;
      placer.taken.push_back(field);
      const ClassId outer = scatter_classes[placer.uniform(0, static_cast<std::int32_t>(scatter_classes.size()) - 1)];
      ClassId inner = outer;
      while (inner == outer) {
        inner = scatter_classes[placer.uniform(0, static_cast<std::int32_t>(scatter_classes.size()) - 1)];
      }
      const std::int32_t m = 6;
      const std::int32_t iw = placer.uniform(small_side, std::min(big_side, fw - 2 * m));
      const std::int32_t ih = placer.uniform(small_side, std::min(big_side, fh - 2 * m));
      const SpanSet inner_px = placer.shape({placer.uniform(fx + m, fx + fw - m - iw), placer.uniform(fy + m, fy + fh - m - ih), iw, ih});
      add(outer, PlantKind::NestedOuter, SpanSet::rect(fx, fy, fw, fh).subtract(inner_px));
      add(inner, PlantKind::NestedInner, inner_px);
    }
  }

  // Scattered singletons of the remaining classes.
  for (std::int32_t r = 0; r < spec.rows; ++r) {
    for (std::int32_t c = 0; c < spec.cols; ++c) {
      if (reserved(r, c)) continue;
      const int count = placer.uniform(1, 2);
      for (int i = 0; i < count; ++i) {
        const auto b = placer.place(grid.tile_box({r, c}), small_side, big_side);
        if (!b) break;
        const ClassId cls = scatter_classes[placer.uniform(0, static_cast<std::int32_t>(scatter_classes.size()) - 1)];
        add(cls, PlantKind::Scatter, placer.shape(*b));
      }
    }
  }

  // Rasters.
  scene.ground_truth = LabelRaster(W, H, spec.background, spec.pixel_size_m);
  for (const auto& p : scene.planted) {
    for (const Span& s : p.pixels.spans()) {
      std::fill_n(scene.ground_truth.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(s.y) * W + s.x0),
                  s.length(), p.class_id);
    }
  }
  scene.prediction = scene.ground_truth;
  scene.mosaic = RgbImage(W, H);
  const std::uint64_t noise_seed = splitmix64(spec.seed ^ 0x5CE7E5EEDULL);
  const auto flip_threshold = static_cast<std::uint64_t>(spec.prediction_noise * 1e6);
  for (std::int32_t y = 0; y < H; ++y) {
    for (std::int32_t x = 0; x < W; ++x) {
      const std::uint64_t h = splitmix64(noise_seed ^ (static_cast<std::uint64_t>(y) * W + x));
      const ClassId cls = scene.ground_truth.at(x, y);
      const Rgb base = class_colour(cls);
      scene.mosaic.set(x, y, {jitter(base.r, h), jitter(base.g, h >> 8), jitter(base.b, h >> 16)});
      if ((h >> 24) % 1000000 < flip_threshold) scene.prediction.at(x, y) = static_cast<ClassId>((cls + 1) % 8);
    }
  }

  // Detections. Every planted object except a field is seen by each fine
  // tile that fully contains it; fields are seen at the coarse scale only,
  // as the full rectangle including their nested object.
  std::uint64_t next_fine = 1, next_coarse = 1;
  for (auto& p : scene.planted) {
    if (p.kind == PlantKind::NestedOuter) {
      const BBox b = p.pixels.bbox();
      const TilePos tile = grid.tile_at(b.x0, b.y0);
      const BBox tb = grid.tile_box(tile);
      const BBox half{(b.x0 - tb.x0) / 2, (b.y0 - tb.y0) / 2, b.w / 2, b.h / 2};
      p.coarse_id = next_coarse++;
      scene.coarse.push_back(MaskRecord::make(p.coarse_id, tile, Scale::Coarse,
                                              RunLengthMask::from_spans(SpanSet::rect(half.x0, half.y0, half.w, half.h))));
      continue;
    }
    const BBox b = p.pixels.bbox();
    for (std::int32_t fr = 0; fr < fine_grid.rows; ++fr) {
      for (std::int32_t fc = 0; fc < fine_grid.cols; ++fc) {
        const BBox tb = fine_grid.tile_box({fr, fc});
        if (b.x0 < tb.x0 || b.y0 < tb.y0 || b.x1() > tb.x1() || b.y1() > tb.y1()) continue;
        if (p.fine_id == 0) p.fine_id = next_fine;
        scene.fine.push_back(MaskRecord::make(next_fine++, {fr, fc}, Scale::Fine,
                                              RunLengthMask::from_spans(p.pixels.translated(-tb.x0, -tb.y0))));
      }
    }
    if (p.fine_id == 0) fail(ErrorCode::Invariant, "planted object not contained in any fine tile");
  }
  sort_canonical(scene.fine);
  sort_canonical(scene.coarse);

  // Planted features: per-class prototype plus small noise.
  std::mt19937_64 frng(splitmix64(spec.seed ^ 0xFEA7ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> proto(8, std::vector<double>(spec.planted_feature_dim));
  for (auto& v : proto) {
    for (double& x : v) x = gauss(frng);
  }
  scene.planted_features = FeatureTable(spec.planted_feature_dim);
  for (const auto& p : scene.planted) {
    std::vector<double> v = proto[p.class_id];
    double norm = 0;
    for (double& x : v) {
      x += 0.02 * gauss(frng) * std::sqrt(static_cast<double>(spec.planted_feature_dim));
    }
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<float> f(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) f[k] = static_cast<float>(v[k] / norm);
    scene.planted_features.insert(p.id, std::move(f));
  }
  return scene;
}

void write_scene(const std::filesystem::path& dir, const SyntheticScene& scene) {
  namespace fs = std::filesystem;
  using namespace scene_files;
  const SceneSpec& s = scene.spec;
  const TileGrid grid = s.grid();
  fs::create_directories(dir / kImages);
  for (std::int32_t r = 0; r < grid.rows; ++r) {
    for (std::int32_t c = 0; c < grid.cols; ++c) {
      const BBox b = grid.tile_box({r, c});
      RgbImage tile(b.w, b.h);
      for (std::int32_t y = 0; y < b.h; ++y) {
        std::copy_n(scene.mosaic.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b.y0 + y) * scene.mosaic.width + b.x0) * 3),
                    static_cast<std::size_t>(b.w) * 3, tile.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(y) * b.w * 3));
      }
      write_rgb_png(dir / kImages / tile_image_name(r, c), tile);
    }
  }
  write_label_raster(dir / kGroundTruth, scene.ground_truth, "oem8");
  write_label_raster(dir / kPrediction, scene.prediction, "oem8");
  write_mask_set(dir / kFine, scene.fine);
  write_mask_set(dir / kCoarse, scene.coarse);
  write_mask_set(dir / kPlanted, scene.planted_records());
  export_features(dir / kPlantedFeatures, scene.planted_features);

  json meta = json::array();
  for (const auto& p : scene.planted) {
    meta.push_back({{"id", p.id}, {"class_id", p.class_id}, {"kind", to_string(p.kind)},
                    {"fine_id", p.fine_id}, {"coarse_id", p.coarse_id}});
  }
  std::ofstream(dir / kPlantedMeta, std::ios::trunc) << meta.dump(1) << '\n';

  const json spec = {{"seed", s.seed},
                     {"tile_size", s.tile_size},
                     {"rows", s.rows},
                     {"cols", s.cols},
                     {"pixel_size_m", s.pixel_size_m},
                     {"schema", "oem8"},
                     {"prediction_noise", s.prediction_noise}};
  std::ofstream out(dir / kSpec, std::ios::trunc);
  out << spec.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "cannot write scene spec under " + dir.string());
}

SceneSpec read_scene_spec(const std::filesystem::path& dir) {
  const auto path = dir / scene_files::kSpec;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "missing scene spec " + path.string());
  try {
    const json j = json::parse(in);
    SceneSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.tile_size = j.at("tile_size").get<std::int32_t>();
    s.rows = j.at("rows").get<std::int32_t>();
    s.cols = j.at("cols").get<std::int32_t>();
    s.pixel_size_m = j.at("pixel_size_m").get<double>();
    s.prediction_noise = j.value("prediction_noise", s.prediction_noise);
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "bad scene spec " + path.string() + ": " + e.what());
  }
}

RgbImage read_mosaic(const std::filesystem::path& images_dir, const TileGrid& grid) {
  RgbImage mosaic(grid.mosaic_width(), grid.mosaic_height());
  for (std::int32_t r = 0; r < grid.rows; ++r) {
    for (std::int32_t c = 0; c < grid.cols; ++c) {
      const BBox b = grid.tile_box({r, c});
      const RgbImage tile = read_rgb_png(images_dir / tile_image_name(r, c));
      if (tile.width != b.w || tile.height != b.h) {
        fail(ErrorCode::DimMismatch, "tile " + tile_image_name(r, c) + " is not " + std::to_string(b.w) + "x" + std::to_string(b.h));
      }
      for (std::int32_t y = 0; y < b.h; ++y) {
        std::copy_n(tile.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(y) * b.w * 3), static_cast<std::size_t>(b.w) * 3,
                    mosaic.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b.y0 + y) * mosaic.width + b.x0) * 3));
      }
    }
  }
  return mosaic;
}

}  // namespace mcae
