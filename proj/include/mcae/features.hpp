#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"

namespace mcae {

/// Unit-norm feature vector per mask id; all entries share one dimension.
class FeatureTable {
 public:
  explicit FeatureTable(std::uint32_t dim = 0) : dim_(dim) {}

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Vectors within 1e-5 of unit norm are stored untouched, within 1e-3 they
  /// are renormalized, anything further is rejected (NotUnitNorm).
  void insert(std::uint64_t id, std::vector<float> vec);

  const std::vector<float>* find(std::uint64_t id) const;
  const std::map<std::uint64_t, std::vector<float>>& entries() const noexcept { return entries_; }

  bool operator==(const FeatureTable&) const = default;

 private:
  std::uint32_t dim_;
  std::map<std::uint64_t, std::vector<float>> entries_;
};

/// MCFT binary layout: "MCFT", u32 version (1), u32 count, u32 dim, then
/// count x (u64 id, dim x f32), all little-endian.
std::vector<std::uint8_t> serialize_features(const FeatureTable& table);
FeatureTable deserialize_features(std::span<const std::uint8_t> bytes);
void export_features(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable import_features(const std::filesystem::path& path);

inline constexpr std::uint32_t kDescriptorDim = 17;

/// Handcrafted 17-d descriptor of the image pixels under a mask (mask and
/// image share a frame): RGB mean and std (scaled to [0,1]), 8-bin hue
/// histogram (fractions), log10(area)/6, perimeter^2/area/100 and bbox
/// short/long side ratio, L2-normalized.
std::vector<float> handcrafted_descriptor(const RgbImage& image, const RunLengthMask& mask);

/// Descriptors for every record over a mosaic image; parallel over masks.
FeatureTable compute_descriptors(const RgbImage& mosaic, const std::vector<MaskRecord>& records,
                                 const TileGrid& grid);

/// Dense per-pixel feature map, row-major, dim floats per pixel.
struct FeatureMap {
  int width = 0;
  int height = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int w, int h, std::uint32_t d) : width(w), height(h), dim(d), data(static_cast<std::size_t>(w) * h * d, 0.0f) {}
  float* at(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * dim; }
  const float* at(int x, int y) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * dim; }
};

struct ConsistencyLossConfig {
  float temperature = 0.07f;
};

/// Cross-crop mask consistency: masks are mean-pooled in each map and
/// normalized, then scored with a temperature-scaled softmax cross-entropy
/// where the same mask in the other crop is the positive. Zero for a single
/// mask.
double crop_consistency_score(const FeatureMap& crop_a, const FeatureMap& crop_b,
                              const std::vector<RunLengthMask>& shared_masks, const ConsistencyLossConfig& cfg);

}  // namespace mcae
