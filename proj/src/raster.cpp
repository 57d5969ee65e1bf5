#include "mcae/raster.hpp"

#include <algorithm>
#include <string>

#include "mcae/error.hpp"

namespace mcae {

LabelRaster LabelRaster::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width || y0 + h > height) {
    fail(ErrorCode::OutOfBounds, "crop window outside raster");
  }
  LabelRaster out(w, h, kIgnoreId, pixel_size_m);
  for (int y = 0; y < h; ++y) {
    const auto* src = data.data() + static_cast<std::size_t>(y0 + y) * width + x0;
    std::copy(src, src + w, out.data.data() + static_cast<std::size_t>(y) * w);
  }
  return out;
}

void LabelRaster::validate(const ClassSchema& schema) const {
  if (data.size() != static_cast<std::size_t>(width) * height) {
    fail(ErrorCode::DimMismatch, "raster data length does not match width x height");
  }
  for (ClassId v : data) {
    if (v != kIgnoreId && !schema.valid(v)) {
      fail(ErrorCode::InvalidClass, "raster value " + std::to_string(v) + " not in schema " + schema.name());
    }
  }
}

}  // namespace mcae
