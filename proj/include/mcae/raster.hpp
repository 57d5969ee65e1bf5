#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcae/schema.hpp"

namespace mcae {

/// Single-band class-id raster, row-major.
struct LabelRaster {
  int width = 0;
  int height = 0;
  std::vector<ClassId> data;
  double pixel_size_m = 1.0;

  LabelRaster() = default;
  LabelRaster(int w, int h, ClassId fill = kIgnoreId, double pixel_size = 1.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill), pixel_size_m(pixel_size) {}

  ClassId at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  ClassId& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  /// Copies the [x0, x0+w) x [y0, y0+h) window; the window must lie inside.
  LabelRaster crop(int x0, int y0, int w, int h) const;

  /// Throws InvalidClass if any pixel is neither a schema class nor ignore.
  void validate(const ClassSchema& schema) const;

  bool operator==(const LabelRaster&) const = default;
};

/// Interleaved 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::span<const std::uint8_t, 3> pixel(int x, int y) const {
    return std::span<const std::uint8_t, 3>(data.data() + (static_cast<std::size_t>(y) * width + x) * 3, 3);
  }
  void set(int x, int y, Rgb c) {
    auto* p = data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  bool operator==(const RgbImage&) const = default;
};

/// Binary grid, one byte per pixel (non-zero = foreground).
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Bitmap() = default;
  Bitmap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool test(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  bool operator==(const Bitmap&) const = default;
};

}  // namespace mcae
