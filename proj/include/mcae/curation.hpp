#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <variant>
#include <vector>

#include "mcae/features.hpp"
#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"
#include "mcae/schema.hpp"

namespace mcae {

struct TileEmbedding {
  TilePos tile;
  std::vector<float> vector;
};

/// Mean-pool then L2-normalize. A zero mean stays zero.
std::vector<float> pool_normalize(const std::vector<std::span<const float>>& vectors);
std::vector<float> tile_embedding(const FeatureMap& map);

/// One embedding per grid tile (row-major) from the features of the masks
/// anchored there; tiles without masks take the normalized global mean.
std::vector<TileEmbedding> tile_embeddings(const FeatureTable& features, const std::vector<MaskRecord>& masks,
                                           const TileGrid& grid);

struct RegionPartition {
  std::vector<std::vector<TilePos>> regions;  ///< ascending tiles, ordered by first tile
  std::vector<std::uint32_t> region_of;       ///< per tile index
  double ssd = 0.0;                           ///< within-region sum of squared deviations
  std::size_t size() const { return regions.size(); }
};

/// Sum of squared deviations from region means for a tile labelling.
double partition_ssd(const std::vector<TileEmbedding>& embeddings, const std::vector<std::uint32_t>& region_of,
                     std::size_t regions);

/// SKATER regionalization: rook-adjacency MST over squared embedding
/// distances, then regions-1 greedy cuts, each taking the tree edge with the
/// largest SSD reduction (ties: lowest tile pair).
RegionPartition skater_partition(const TileGrid& grid, const std::vector<TileEmbedding>& embeddings,
                                 std::size_t regions);

/// Default region count when unspecified: ceil(tiles / 400).
std::size_t default_region_count(const TileGrid& grid);

struct SampleResult {
  std::vector<TilePos> tiles;                ///< sorted canonically
  std::vector<std::uint32_t> short_regions;  ///< regions with fewer than n available
};

/// Uniform sampling without replacement per region. Region r uses an
/// mt19937_64 seeded with splitmix64(seed ^ splitmix64(r)) and a partial
/// Fisher-Yates shuffle over its non-excluded tiles in ascending order.
SampleResult stratified_sample(const RegionPartition& partition, std::size_t n_per_region, std::uint64_t seed,
                               const std::set<TilePos>& exclude = {});

std::uint64_t splitmix64(std::uint64_t x);

/// Masks intersecting a tile, translated into tile-local coordinates.
std::vector<RunLengthMask> masks_for_tile(const std::vector<MaskRecord>& masks, const TileGrid& grid, TilePos tile);

/// Each mask region becomes its majority predicted class; other pixels keep
/// the prediction. Masks are expected to be disjoint.
LabelRaster draft_annotation(const LabelRaster& prediction, const std::vector<RunLengthMask>& masks);

struct RefinementEdit {
  std::variant<BBox, RunLengthMask> region;
  ClassId class_id = 0;
};

/// Applies edits in order (later edits win on overlap).
LabelRaster apply_refinement(const LabelRaster& draft, const std::vector<RefinementEdit>& edits,
                             const ClassSchema& schema);
std::vector<RefinementEdit> read_edits(const std::filesystem::path& path);

enum class TileStatus { Drafted, Refined };

struct RefinementRound {
  std::uint32_t round = 1;
  std::uint64_t seed = 0;
  std::size_t n_per_region = 0;
  std::vector<TilePos> sampled_tiles;
  std::map<TilePos, TileStatus> status;

  void mark_refined(TilePos tile);
  void save(const std::filesystem::path& path) const;
  static RefinementRound load(const std::filesystem::path& path);
};

/// Tiles sampled by every round manifest round_*.json in a directory.
std::set<TilePos> previously_sampled(const std::filesystem::path& curation_dir, std::uint32_t before_round);
std::filesystem::path round_manifest_path(const std::filesystem::path& curation_dir, std::uint32_t round);

void save_partition(const std::filesystem::path& path, const RegionPartition& partition, const TileGrid& grid);
RegionPartition load_partition(const std::filesystem::path& path, TileGrid* grid = nullptr);

}  // namespace mcae
