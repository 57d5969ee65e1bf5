#include "mcae/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "mcae/error.hpp"

namespace mcae {

namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::Io, std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int width, int height, int channels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (!png) fail(ErrorCode::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  return out;
}

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

Decoded decode(const std::filesystem::path& path, int channels) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) fail(ErrorCode::Io, "cannot open " + path.string());
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(fp, std::fclose);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (!png) fail(ErrorCode::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
  if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !is_gray) fail(ErrorCode::Io, path.string() + ": expected a single-channel label PNG");
  png_read_update_info(png, info);
  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(d.width) * channels) fail(ErrorCode::Io, path.string() + ": unexpected row layout");
  d.pixels.resize(stride * d.height);
  std::vector<png_bytep> rows(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = d.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return d;
}

std::filesystem::path meta_path(const std::filesystem::path& p) { return p.string() + ".meta"; }

std::string read_meta_value(const std::filesystem::path& raster_path, const std::string& key) {
  std::ifstream in(meta_path(raster_path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line.substr(0, eq) == key) return line.substr(eq + 1);
  }
  return {};
}

}  // namespace

std::vector<std::uint8_t> encode_png(const LabelRaster& raster) {
  return encode(raster.data.data(), raster.width, raster.height, 1);
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return encode(image.data.data(), image.width, image.height, 3);
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_label_raster(const std::filesystem::path& path, const LabelRaster& raster, const std::string& schema_name) {
  write_bytes(path, encode_png(raster));
  std::ofstream meta(meta_path(path), std::ios::trunc);
  std::ostringstream px;
  px.precision(17);
  px << raster.pixel_size_m;
  meta << "pixel_size_m=" << px.str() << "\nschema=" << schema_name << "\n";
}

LabelRaster read_label_raster(const std::filesystem::path& path) {
  Decoded d = decode(path, 1);
  LabelRaster r;
  r.width = d.width;
  r.height = d.height;
  r.data = std::move(d.pixels);
  const std::string px = read_meta_value(path, "pixel_size_m");
  r.pixel_size_m = px.empty() ? 1.0 : std::stod(px);
  return r;
}

std::string read_schema_name(const std::filesystem::path& raster_path, const std::string& fallback) {
  const std::string s = read_meta_value(raster_path, "schema");
  return s.empty() ? fallback : s;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) { write_bytes(path, encode_png(image)); }

RgbImage read_rgb_png(const std::filesystem::path& path) {
  Decoded d = decode(path, 3);
  RgbImage img;
  img.width = d.width;
  img.height = d.height;
  img.data = std::move(d.pixels);
  return img;
}

std::string tile_image_name(std::int32_t row, std::int32_t col) {
  return "tile_r" + std::to_string(row) + "_c" + std::to_string(col) + ".png";
}

}  // namespace mcae
