#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mcae/rle.hpp"
#include "mcae/tile_grid.hpp"

namespace mcae {

enum class Scale { Fine, Coarse, Fused };

std::string_view to_string(Scale s);
Scale parse_scale(std::string_view s);

/// A mask with identity and tile address. The bbox is relative to the tile
/// origin; fused masks may extend past their anchor tile.
struct MaskRecord {
  std::uint64_t id = 0;
  TilePos tile;
  Scale scale = Scale::Fine;
  RunLengthMask mask;
  std::uint32_t area_px = 0;

  static MaskRecord make(std::uint64_t id, TilePos tile, Scale scale, RunLengthMask mask) {
    const auto area = static_cast<std::uint32_t>(mask.area());
    return {id, tile, scale, std::move(mask), area};
  }
};

/// Mask translated into mosaic coordinates. Throws TileOutOfRange.
RunLengthMask global_frame(const MaskRecord& record, const TileGrid& grid);

/// Re-anchors a mosaic-frame mask to the grid tile holding its area-weighted
/// centroid.
MaskRecord anchor_to_grid(std::uint64_t id, Scale scale, const RunLengthMask& global_mask, const TileGrid& grid);

/// Canonical ordering: tile row, tile col, bbox y0, bbox x0, id.
void sort_canonical(std::vector<MaskRecord>& records);

/// JSON-lines mask set, one record per line.
std::vector<MaskRecord> read_mask_set(const std::filesystem::path& path);
void write_mask_set(const std::filesystem::path& path, const std::vector<MaskRecord>& records);

std::string mask_record_to_json(const MaskRecord& record);
MaskRecord mask_record_from_json(std::string_view line);

}  // namespace mcae
