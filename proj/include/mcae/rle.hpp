#pragma once

#include <cstdint>
#include <vector>

#include "mcae/raster.hpp"

namespace mcae {

struct BBox {
  std::int32_t x0 = 0;
  std::int32_t y0 = 0;
  std::int32_t w = 0;
  std::int32_t h = 0;

  std::int64_t x1() const { return std::int64_t{x0} + w; }
  std::int64_t y1() const { return std::int64_t{y0} + h; }
  std::int64_t area() const { return std::int64_t{w} * h; }
  bool operator==(const BBox&) const = default;
};

/// Horizontal run of foreground pixels on row y covering [x0, x1).
struct Span {
  std::int32_t y = 0;
  std::int32_t x0 = 0;
  std::int32_t x1 = 0;

  std::int32_t length() const { return x1 - x0; }
  bool operator==(const Span&) const = default;
};

/// Pixel set stored as sorted, non-touching row spans. This is the working
/// representation for mask algebra; RunLengthMask is the interchange form.
class SpanSet {
 public:
  SpanSet() = default;
  /// Accepts spans in any order, possibly overlapping; normalizes them.
  explicit SpanSet(std::vector<Span> spans);

  static SpanSet rect(std::int32_t x0, std::int32_t y0, std::int32_t w, std::int32_t h);

  const std::vector<Span>& spans() const noexcept { return spans_; }
  bool empty() const noexcept { return spans_.empty(); }
  std::uint64_t area() const noexcept;
  /// Tight bounding box; zero box when empty.
  BBox bbox() const;
  bool contains(std::int32_t x, std::int32_t y) const;

  SpanSet intersect(const SpanSet& other) const;
  SpanSet subtract(const SpanSet& other) const;
  SpanSet unite(const SpanSet& other) const;
  bool intersects(const SpanSet& other) const;
  std::uint64_t intersection_area(const SpanSet& other) const;

  SpanSet translated(std::int32_t dx, std::int32_t dy) const;
  SpanSet clipped(const BBox& window) const { return intersect(rect(window.x0, window.y0, window.w, window.h)); }

  /// 4-connected components, ordered by their first span.
  std::vector<SpanSet> components() const;

  /// Count of unit pixel edges between the set and its complement.
  std::uint64_t perimeter() const;

  /// Area-weighted centroid (pixel centers at +0.5).
  std::pair<double, double> centroid() const;

  bool operator==(const SpanSet&) const = default;

 private:
  std::vector<Span> spans_;
};

/// COCO-style run-length mask: counts alternate background/foreground in
/// row-major order within bbox, starting with a (possibly zero) background
/// count.
class RunLengthMask {
 public:
  RunLengthMask() = default;

  /// Validates canonical form; throws InvalidRle or EmptyMask.
  RunLengthMask(BBox bbox, std::vector<std::uint32_t> runs);

  const BBox& bbox() const noexcept { return bbox_; }
  const std::vector<std::uint32_t>& runs() const noexcept { return runs_; }
  std::uint64_t area() const noexcept { return area_; }

  SpanSet spans() const;
  static RunLengthMask from_spans(const SpanSet& set);

  RunLengthMask translated(std::int32_t dx, std::int32_t dy) const;

  bool operator==(const RunLengthMask& o) const { return bbox_ == o.bbox_ && runs_ == o.runs_; }

 private:
  BBox bbox_;
  std::vector<std::uint32_t> runs_;
  std::uint64_t area_ = 0;
};

/// Encodes bitmap placed with its top-left corner at (x0, y0); the bbox is
/// the bitmap extent. Throws EmptyMask for an all-background bitmap.
RunLengthMask rle_encode(const Bitmap& bitmap, std::int32_t x0 = 0, std::int32_t y0 = 0);

/// Decodes to a bitmap covering exactly the mask bbox.
Bitmap rle_decode(const RunLengthMask& mask);

enum class Relation { Disjoint, Equal, AInsideB, BInsideA, Partial };

const char* to_string(Relation r);

struct RelationResult {
  Relation relation = Relation::Disjoint;
  std::uint64_t intersection_area = 0;
};

/// Set relation between two masks in a shared frame.
RelationResult mask_relation(const RunLengthMask& a, const RunLengthMask& b);
RelationResult mask_relation(const SpanSet& a, const SpanSet& b);

/// Nearest-neighbour x2 upsampling: every pixel becomes a 2x2 block.
RunLengthMask upsample2x(const RunLengthMask& mask);

}  // namespace mcae
