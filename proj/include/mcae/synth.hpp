#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcae/features.hpp"
#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"
#include "mcae/tile_grid.hpp"

namespace mcae {

struct SceneSpec {
  std::uint64_t seed = 1;
  std::int32_t tile_size = 128;
  std::int32_t rows = 10;
  std::int32_t cols = 10;
  double pixel_size_m = 0.3;
  ClassId background = 1;    ///< rangeland
  ClassId colony_class = 7;  ///< building
  ClassId sparse_class = 5;  ///< water
  std::uint32_t colony_size = 30;
  std::uint32_t sparse_size = 8;
  std::uint32_t planted_feature_dim = 16;
  double prediction_noise = 0.05;

  void validate() const;
  TileGrid grid() const { return {tile_size, rows, cols}; }
  TileGrid fine_grid() const { return {tile_size, 2 * rows - 1, 2 * cols - 1, 0.5}; }
  TileGrid coarse_grid() const { return {tile_size / 2, rows, cols}; }
};

enum class PlantKind { Colony, Sparse, Scatter, NestedInner, NestedOuter };
std::string_view to_string(PlantKind k);
PlantKind parse_plant_kind(std::string_view s);

struct PlantedObject {
  std::uint64_t id = 0;
  ClassId class_id = 0;
  PlantKind kind = PlantKind::Scatter;
  SpanSet pixels;              ///< mosaic frame, final (post-fusion) pixel set
  std::uint64_t fine_id = 0;   ///< planted fine detection, 0 when coarse-only
  std::uint64_t coarse_id = 0; ///< planted coarse detection, 0 when fine-only
};

/// Desk-scale scene: a tiled RGB mosaic whose colours follow the ground
/// truth, fine detections on the 50%-overlap grid (one per containing tile,
/// hence cross-tile duplicates), coarse detections on the half-resolution
/// grid, and class-separable planted features.
struct SyntheticScene {
  SceneSpec spec;
  RgbImage mosaic;
  LabelRaster ground_truth;
  LabelRaster prediction;
  std::vector<MaskRecord> fine;    ///< fine grid, tile-local
  std::vector<MaskRecord> coarse;  ///< coarse grid, tile-local, half resolution
  std::vector<PlantedObject> planted;
  FeatureTable planted_features;

  /// Planted objects as records anchored to the annotation grid.
  std::vector<MaskRecord> planted_records() const;
};

SyntheticScene generate_scene(const SceneSpec& spec);

/// Scene directory layout.
namespace scene_files {
inline constexpr const char* kSpec = "scene.json";
inline constexpr const char* kImages = "images";
inline constexpr const char* kGroundTruth = "gt.png";
inline constexpr const char* kPrediction = "pred.png";
inline constexpr const char* kFine = "masks_fine.jsonl";
inline constexpr const char* kCoarse = "masks_coarse.jsonl";
inline constexpr const char* kPlanted = "planted.jsonl";
inline constexpr const char* kPlantedMeta = "planted.json";
inline constexpr const char* kPlantedFeatures = "planted_features.mcft";
}  // namespace scene_files

void write_scene(const std::filesystem::path& dir, const SyntheticScene& scene);
SceneSpec read_scene_spec(const std::filesystem::path& dir);

/// Stitches annotation-grid tiles tile_r{r}_c{c}.png into one mosaic.
RgbImage read_mosaic(const std::filesystem::path& images_dir, const TileGrid& grid);

}  // namespace mcae
