#pragma once

#include <cstdint>
#include <vector>

#include "mcae/rle.hpp"

namespace mcae {

struct TilePos {
  std::int32_t row = 0;
  std::int32_t col = 0;
  auto operator<=>(const TilePos&) const = default;
};

/// Regular tiling of a mosaic. Tile (r, c) starts at (c * stride, r * stride)
/// where stride = tile_size minus the overlapping pixels.
struct TileGrid {
  std::int32_t tile_size = 1024;
  std::int32_t rows = 1;
  std::int32_t cols = 1;
  double overlap_ratio = 0.0;

  TileGrid() = default;
  TileGrid(std::int32_t size, std::int32_t r, std::int32_t c, double overlap = 0.0);

  std::int32_t stride() const;
  std::int32_t mosaic_width() const { return (cols - 1) * stride() + tile_size; }
  std::int32_t mosaic_height() const { return (rows - 1) * stride() + tile_size; }
  std::size_t tile_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t index(TilePos t) const { return static_cast<std::size_t>(t.row) * cols + t.col; }
  TilePos position(std::size_t index) const {
    return {static_cast<std::int32_t>(index / cols), static_cast<std::int32_t>(index % cols)};
  }

  bool contains(TilePos t) const { return t.row >= 0 && t.col >= 0 && t.row < rows && t.col < cols; }
  /// Global extent of a tile; throws TileOutOfRange.
  BBox tile_box(TilePos t) const;

  /// Tile whose non-overlapping stride cell holds mosaic point (x, y),
  /// clamped to the grid.
  TilePos tile_at(double x, double y) const;

  /// A grid with a single tile covering the given mosaic; records anchored to
  /// its (0,0) tile are in mosaic coordinates.
  static TileGrid mosaic(std::int32_t width, std::int32_t height);

  bool operator==(const TileGrid&) const = default;
};

}  // namespace mcae
