#pragma once

#include <cstdint>
#include <vector>

#include "mcae/mask_record.hpp"

namespace mcae {

/// Cross-tile agreement thresholds, measured as IoU inside the shared
/// overlap window of two tiles.
struct ConsistencyConfig {
  double iou_match = 0.95;
  double iou_conflict_floor = 0.10;
  void validate() const;
};

struct FusionConfig {
  std::uint32_t min_fragment_px = 32;
  void validate() const;
};

struct OverlapResolution {
  std::vector<MaskRecord> kept;
  std::vector<std::uint64_t> duplicate_ids;  ///< dropped as copies of a kept mask
  std::vector<std::uint64_t> conflict_ids;   ///< dropped as inconsistent
};

/// Deduplicates fine masks produced on overlapping tiles. Pairs from
/// different overlapping tiles are compared inside their shared window:
/// IoU >= iou_match keeps the larger copy (ties: smaller id), IoU in
/// (floor, match) discards both, anything lower is two distinct objects.
OverlapResolution resolve_overlap_tiles_detailed(const std::vector<MaskRecord>& fine, const TileGrid& grid,
                                                 const ConsistencyConfig& cfg);
std::vector<MaskRecord> resolve_overlap_tiles(const std::vector<MaskRecord>& fine, const TileGrid& grid,
                                              const ConsistencyConfig& cfg);

struct FusionResult {
  std::vector<MaskRecord> fused;       ///< mosaic frame, tile (0,0), ids 1..n
  std::vector<SpanSet> dropped;        ///< fragments below min_fragment_px
  std::uint64_t dropped_px() const;
};

/// Two-scale fusion with the finer mask winning every contested pixel. Both
/// inputs are read in a common mosaic frame (mask coordinates only; tile is
/// ignored), coarse masks already upsampled to the fine pixel grid. Output
/// masks are pairwise disjoint and cover the input union minus dropped
/// fragments.
FusionResult fuse_scales_detailed(const std::vector<MaskRecord>& fine, const std::vector<MaskRecord>& coarse,
                                  const FusionConfig& cfg);
std::vector<MaskRecord> fuse_scales(const std::vector<MaskRecord>& fine, const std::vector<MaskRecord>& coarse,
                                    const FusionConfig& cfg);

/// Re-expresses tile-local records in mosaic coordinates (tile (0,0)).
std::vector<MaskRecord> to_mosaic_frame(const std::vector<MaskRecord>& records, const TileGrid& grid);

/// Coarse records (tile-local on the half-resolution grid) mapped to the fine
/// mosaic frame by x2 nearest-neighbour upsampling.
std::vector<MaskRecord> coarse_to_fine_frame(const std::vector<MaskRecord>& coarse, const TileGrid& coarse_grid);

/// Mosaic-frame records re-anchored to the tile of their centroid, sorted
/// canonically.
std::vector<MaskRecord> anchor_all(const std::vector<MaskRecord>& mosaic_records, const TileGrid& grid);

}  // namespace mcae
