#include "mcae/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "mcae/error.hpp"
#include "mcae/image_io.hpp"

namespace mcae {

namespace {

constexpr std::uint32_t kVersion = 1;

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "MCFT writer assumes a little-endian host");
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void FeatureTable::insert(std::uint64_t id, std::vector<float> vec) {
  if (dim_ == 0 && entries_.empty()) dim_ = static_cast<std::uint32_t>(vec.size());
  if (vec.size() != dim_ || dim_ == 0) {
    fail(ErrorCode::DimMismatch, "feature for mask " + std::to_string(id) + " has dim " + std::to_string(vec.size()) +
                                     ", table dim " + std::to_string(dim_));
  }
  for (float x : vec) {
    if (!std::isfinite(x)) fail(ErrorCode::NonFiniteFeature, "feature for mask " + std::to_string(id) + " is not finite");
  }
  if (entries_.contains(id)) fail(ErrorCode::DuplicateId, "duplicate feature id " + std::to_string(id));
  const double n = norm_of(vec);
  if (std::abs(n - 1.0) > 1e-3) {
    fail(ErrorCode::NotUnitNorm, "feature for mask " + std::to_string(id) + " has norm " + std::to_string(n));
  }
  if (std::abs(n - 1.0) > 1e-5) {
    for (float& x : vec) x = static_cast<float>(x / n);
  }
  entries_.emplace(id, std::move(vec));
}

const std::vector<float>* FeatureTable::find(std::uint64_t id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::uint8_t> serialize_features(const FeatureTable& table) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + table.size() * (8 + 4 * table.dim()));
  out.insert(out.end(), {'M', 'C', 'F', 'T'});
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(table.size()));
  put_le(out, table.dim());
  for (const auto& [id, vec] : table.entries()) {
    put_le(out, id);
    for (float x : vec) put_le(out, x);
  }
  return out;
}

FeatureTable deserialize_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "MCFT", 4) != 0) fail(ErrorCode::Parse, "not an MCFT file");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kVersion) fail(ErrorCode::Parse, "unsupported MCFT version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(bytes, pos);
  const auto dim = get_le<std::uint32_t>(bytes, pos);
  if (count > 0 && dim == 0) fail(ErrorCode::DimMismatch, "MCFT header has zero dim with entries");
  const std::uint64_t record = 8 + 4 * static_cast<std::uint64_t>(dim);
  if (bytes.size() != 16 + record * count) {
    fail(ErrorCode::DimMismatch, "MCFT size " + std::to_string(bytes.size()) + " does not match " +
                                     std::to_string(count) + " records of dim " + std::to_string(dim));
  }
  FeatureTable table(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto id = get_le<std::uint64_t>(bytes, pos);
    std::vector<float> vec(dim);
    for (auto& x : vec) x = get_le<float>(bytes, pos);
    table.insert(id, std::move(vec));
  }
  return table;
}

void export_features(const std::filesystem::path& path, const FeatureTable& table) {
  write_bytes(path, serialize_features(table));
}

FeatureTable import_features(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return deserialize_features(bytes);
}

std::vector<float> handcrafted_descriptor(const RgbImage& image, const RunLengthMask& mask) {
  const BBox& box = mask.bbox();
  if (box.x0 < 0 || box.y0 < 0 || box.x1() > image.width || box.y1() > image.height) {
    fail(ErrorCode::OutOfBounds, "mask bbox exceeds image bounds");
  }
  const SpanSet pixels = mask.spans();
  const double area = static_cast<double>(pixels.area());
  if (area < 1) fail(ErrorCode::EmptyMask, "descriptor of an empty mask");

  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  double hue_bins[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (const Span& s : pixels.spans()) {
    for (std::int32_t x = s.x0; x < s.x1; ++x) {
      const auto px = image.pixel(x, s.y);
      const double c[3] = {px[0] / 255.0, px[1] / 255.0, px[2] / 255.0};
      for (int k = 0; k < 3; ++k) {
        sum[k] += c[k];
        sq[k] += c[k] * c[k];
      }
      const double mx = std::max({c[0], c[1], c[2]});
      const double mn = std::min({c[0], c[1], c[2]});
      double hue = 0.0;
      if (mx > mn) {
        const double d = mx - mn;
        if (mx == c[0]) {
          hue = 60.0 * std::fmod((c[1] - c[2]) / d + 6.0, 6.0);
        } else if (mx == c[1]) {
          hue = 60.0 * ((c[2] - c[0]) / d + 2.0);
        } else {
          hue = 60.0 * ((c[0] - c[1]) / d + 4.0);
        }
      }
      const int bin = std::clamp(static_cast<int>(hue / 45.0), 0, 7);
      hue_bins[bin] += 1.0;
    }
  }

  std::vector<double> v;
  v.reserve(kDescriptorDim);
  for (double s : sum) v.push_back(s / area);
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / area;
    v.push_back(std::sqrt(std::max(0.0, sq[k] / area - mean * mean)));
  }
  for (double b : hue_bins) v.push_back(b / area);
  const BBox tight = pixels.bbox();
  const double perim = static_cast<double>(pixels.perimeter());
  v.push_back(std::log10(area) / 6.0);
  v.push_back(perim * perim / area / 100.0);
  v.push_back(static_cast<double>(std::min(tight.w, tight.h)) / std::max(tight.w, tight.h));

  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

FeatureTable compute_descriptors(const RgbImage& mosaic, const std::vector<MaskRecord>& records,
                                 const TileGrid& grid) {
  std::vector<std::vector<float>> vecs(records.size());
  const auto n = static_cast<std::int64_t>(records.size());
  // Workers only write their own slot; exceptions are rethrown after the loop.
  std::vector<std::string> errors(records.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      vecs[i] = handcrafted_descriptor(mosaic, global_frame(records[i], grid));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  FeatureTable table(kDescriptorDim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!errors[i].empty()) fail(ErrorCode::OutOfBounds, "mask " + std::to_string(records[i].id) + ": " + errors[i]);
    table.insert(records[i].id, std::move(vecs[i]));
  }
  return table;
}

namespace {

std::vector<double> pool(const FeatureMap& map, const RunLengthMask& mask) {
  const BBox& box = mask.bbox();
  if (box.x0 < 0 || box.y0 < 0 || box.x1() > map.width || box.y1() > map.height) {
    fail(ErrorCode::OutOfBounds, "shared mask exceeds feature map bounds");
  }
  std::vector<double> acc(map.dim, 0.0);
  const SpanSet pixels = mask.spans();
  for (const Span& s : pixels.spans()) {
    for (std::int32_t x = s.x0; x < s.x1; ++x) {
      const float* f = map.at(x, s.y);
      for (std::uint32_t k = 0; k < map.dim; ++k) acc[k] += f[k];
    }
  }
  double n = 0.0;
  for (double x : acc) n += x * x;
  n = std::sqrt(n);
  if (n > 0) {
    for (double& x : acc) x /= n;
  }
  return acc;
}

}  // namespace

double crop_consistency_score(const FeatureMap& crop_a, const FeatureMap& crop_b,
                              const std::vector<RunLengthMask>& shared_masks, const ConsistencyLossConfig& cfg) {
  if (shared_masks.empty()) fail(ErrorCode::InvalidArgument, "consistency score needs at least one shared mask");
  if (!(cfg.temperature > 0)) fail(ErrorCode::Config, "temperature must be positive");
  if (crop_a.dim != crop_b.dim) fail(ErrorCode::DimMismatch, "feature maps differ in dim");
  const std::size_t m = shared_masks.size();
  if (m == 1) return 0.0;
  std::vector<std::vector<double>> a(m), b(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = pool(crop_a, shared_masks[i]);
    b[i] = pool(crop_b, shared_masks[i]);
  }
  const double inv_t = 1.0 / cfg.temperature;
  double total = 0.0;
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) dot += a[i][k] * b[j][k];
      logits[j] = dot * inv_t;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += -(logits[i] - mx - std::log(z));
  }
  return total / static_cast<double>(m);
}

}  // namespace mcae
