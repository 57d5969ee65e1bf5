#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcae/clustering.hpp"
#include "mcae/fusion.hpp"
#include "mcae/schema.hpp"
#include "mcae/tile_grid.hpp"

namespace mcae {

struct CurationConfig {
  std::size_t regions = 0;  ///< 0 selects default_region_count
  std::size_t n_per_region = 100;
  std::uint64_t seed = 7;
};

struct PathsConfig {
  std::filesystem::path scene = "scene";
  std::filesystem::path run = "run";
  std::optional<std::filesystem::path> features;  ///< precomputed MCFT; handcrafted when unset
};

/// Engine configuration. Files are INI: top-level keys plus [consistency],
/// [fusion], [cluster], [curation] and [paths] sections.
struct EngineConfig {
  std::string schema = "oem8";
  std::int32_t tile_size = 128;
  double overlap_ratio = 0.5;  ///< fine-grid overlap
  std::int32_t grid_rows = 10;
  std::int32_t grid_cols = 10;
  double pixel_size_m = 0.3;
  std::uint64_t seed = 1;
  bool auto_label = true;  ///< label every cluster from scene ground truth

  ConsistencyConfig consistency;
  FusionConfig fusion;
  ClusterConfig cluster;
  CurationConfig curation;
  PathsConfig paths;

  /// Sets "section.key" (or a top-level key); throws Config on unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  ClassSchema class_schema() const;
  TileGrid annotation_grid() const { return {tile_size, grid_rows, grid_cols}; }
  TileGrid fine_grid() const;
  TileGrid coarse_grid() const { return {tile_size / 2, grid_rows, grid_cols}; }

  /// Key/value pairs in a fixed order, as written by save().
  std::vector<std::pair<std::string, std::string>> entries() const;
  void save(const std::filesystem::path& path) const;
};

EngineConfig load_config(const std::filesystem::path& path);
ClassSchema schema_by_name(const std::string& name);

}  // namespace mcae
