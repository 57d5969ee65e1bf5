#include "mcae/tile_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcae/error.hpp"

namespace mcae {

TileGrid::TileGrid(std::int32_t size, std::int32_t r, std::int32_t c, double overlap)
    : tile_size(size), rows(r), cols(c), overlap_ratio(overlap) {
  if (tile_size <= 0) fail(ErrorCode::Config, "tile_size must be positive");
  if (rows <= 0 || cols <= 0) fail(ErrorCode::Config, "grid must have at least one tile");
  if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0)) fail(ErrorCode::Config, "overlap_ratio must be in [0, 1)");
  if (stride() <= 0) fail(ErrorCode::Config, "overlap leaves no stride");
}

std::int32_t TileGrid::stride() const {
  return tile_size - static_cast<std::int32_t>(std::lround(tile_size * overlap_ratio));
}

BBox TileGrid::tile_box(TilePos t) const {
  if (!contains(t)) {
    fail(ErrorCode::TileOutOfRange, "tile (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                        ") outside " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  return {t.col * stride(), t.row * stride(), tile_size, tile_size};
}

TilePos TileGrid::tile_at(double x, double y) const {
  const auto r = static_cast<std::int32_t>(std::floor(y / stride()));
  const auto c = static_cast<std::int32_t>(std::floor(x / stride()));
  return {std::clamp(r, 0, rows - 1), std::clamp(c, 0, cols - 1)};
}

TileGrid TileGrid::mosaic(std::int32_t width, std::int32_t height) {
  TileGrid g;
  g.tile_size = std::max(width, height);
  g.rows = 1;
  g.cols = 1;
  g.overlap_ratio = 0.0;
  return g;
}

}  // namespace mcae
