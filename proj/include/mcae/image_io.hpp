#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcae/raster.hpp"

namespace mcae {

std::vector<std::uint8_t> encode_png(const LabelRaster& raster);
std::vector<std::uint8_t> encode_png(const RgbImage& image);

/// Writes the raster as 8-bit grayscale PNG plus a "<path>.meta" sidecar
/// holding pixel_size_m and the schema name.
void write_label_raster(const std::filesystem::path& path, const LabelRaster& raster, const std::string& schema_name);
/// Reads a label PNG; pixel size comes from the sidecar when present.
LabelRaster read_label_raster(const std::filesystem::path& path);
std::string read_schema_name(const std::filesystem::path& raster_path, const std::string& fallback);

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_rgb_png(const std::filesystem::path& path);

/// Tile image file name used inside image directories: tile_r{row}_c{col}.png
std::string tile_image_name(std::int32_t row, std::int32_t col);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace mcae
