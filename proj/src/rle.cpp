#include "mcae/rle.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mcae/error.hpp"

namespace mcae {

namespace {

bool span_less(const Span& a, const Span& b) {
  return a.y != b.y ? a.y < b.y : a.x0 < b.x0;
}

bool overlaps(const Span& a, const Span& b) { return a.x0 < b.x1 && b.x0 < a.x1; }

// First index of each row in a sorted span vector, plus a terminating entry.
std::vector<std::size_t> row_starts(const std::vector<Span>& spans) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i == 0 || spans[i].y != spans[i - 1].y) starts.push_back(i);
  }
  starts.push_back(spans.size());
  return starts;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

SpanSet::SpanSet(std::vector<Span> spans) {
  std::erase_if(spans, [](const Span& s) { return s.x1 <= s.x0; });
  if (!std::is_sorted(spans.begin(), spans.end(), span_less)) {
    std::sort(spans.begin(), spans.end(), span_less);
  }
  spans_.reserve(spans.size());
  for (const Span& s : spans) {
    if (!spans_.empty() && spans_.back().y == s.y && s.x0 <= spans_.back().x1) {
      spans_.back().x1 = std::max(spans_.back().x1, s.x1);
    } else {
      spans_.push_back(s);
    }
  }
}

SpanSet SpanSet::rect(std::int32_t x0, std::int32_t y0, std::int32_t w, std::int32_t h) {
  std::vector<Span> spans;
  if (w > 0 && h > 0) {
    spans.reserve(static_cast<std::size_t>(h));
    for (std::int32_t y = y0; y < y0 + h; ++y) spans.push_back({y, x0, x0 + w});
  }
  return SpanSet(std::move(spans));
}

std::uint64_t SpanSet::area() const noexcept {
  std::uint64_t total = 0;
  for (const Span& s : spans_) total += static_cast<std::uint64_t>(s.length());
  return total;
}

BBox SpanSet::bbox() const {
  if (spans_.empty()) return {};
  std::int32_t xmin = spans_.front().x0, xmax = spans_.front().x1;
  for (const Span& s : spans_) {
    xmin = std::min(xmin, s.x0);
    xmax = std::max(xmax, s.x1);
  }
  return {xmin, spans_.front().y, xmax - xmin, spans_.back().y - spans_.front().y + 1};
}

bool SpanSet::contains(std::int32_t x, std::int32_t y) const {
  auto it = std::upper_bound(spans_.begin(), spans_.end(), Span{y, x, x},
                             [](const Span& a, const Span& b) { return span_less(a, b); });
  if (it == spans_.begin()) return false;
  --it;
  return it->y == y && x >= it->x0 && x < it->x1;
}

SpanSet SpanSet::intersect(const SpanSet& other) const {
  std::vector<Span> out;
  const auto& a = spans_;
  const auto& b = other.spans_;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].y < b[j].y) {
      ++i;
    } else if (b[j].y < a[i].y) {
      ++j;
    } else {
      const std::int32_t lo = std::max(a[i].x0, b[j].x0);
      const std::int32_t hi = std::min(a[i].x1, b[j].x1);
      if (lo < hi) out.push_back({a[i].y, lo, hi});
      if (a[i].x1 < b[j].x1) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  SpanSet result;
  result.spans_ = std::move(out);
  return result;
}

std::uint64_t SpanSet::intersection_area(const SpanSet& other) const {
  std::uint64_t total = 0;
  const auto& a = spans_;
  const auto& b = other.spans_;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].y < b[j].y) {
      ++i;
    } else if (b[j].y < a[i].y) {
      ++j;
    } else {
      const std::int32_t lo = std::max(a[i].x0, b[j].x0);
      const std::int32_t hi = std::min(a[i].x1, b[j].x1);
      if (lo < hi) total += static_cast<std::uint64_t>(hi - lo);
      if (a[i].x1 < b[j].x1) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  return total;
}

bool SpanSet::intersects(const SpanSet& other) const {
  if (empty() || other.empty()) return false;
  const BBox ba = bbox(), bb = other.bbox();
  if (ba.x0 >= bb.x1() || bb.x0 >= ba.x1() || ba.y0 >= bb.y1() || bb.y0 >= ba.y1()) return false;
  return intersection_area(other) > 0;
}

SpanSet SpanSet::subtract(const SpanSet& other) const {
  std::vector<Span> out;
  const auto& b = other.spans_;
  std::size_t j = 0;
  for (const Span& s : spans_) {
    while (j < b.size() && (b[j].y < s.y || (b[j].y == s.y && b[j].x1 <= s.x0))) ++j;
    std::int32_t cur = s.x0;
    for (std::size_t k = j; k < b.size() && b[k].y == s.y && b[k].x0 < s.x1; ++k) {
      if (b[k].x0 > cur) out.push_back({s.y, cur, b[k].x0});
      cur = std::max(cur, b[k].x1);
    }
    if (cur < s.x1) out.push_back({s.y, cur, s.x1});
  }
  SpanSet result;
  result.spans_ = std::move(out);
  return result;
}

SpanSet SpanSet::unite(const SpanSet& other) const {
  std::vector<Span> merged;
  merged.reserve(spans_.size() + other.spans_.size());
  std::merge(spans_.begin(), spans_.end(), other.spans_.begin(), other.spans_.end(),
             std::back_inserter(merged), span_less);
  return SpanSet(std::move(merged));
}

SpanSet SpanSet::translated(std::int32_t dx, std::int32_t dy) const {
  SpanSet result = *this;
  for (Span& s : result.spans_) {
    s.y += dy;
    s.x0 += dx;
    s.x1 += dx;
  }
  return result;
}

std::vector<SpanSet> SpanSet::components() const {
  const std::size_t n = spans_.size();
  if (n == 0) return {};
  UnionFind uf(n);
  const auto starts = row_starts(spans_);
  for (std::size_t r = 0; r + 2 < starts.size(); ++r) {
    const std::size_t a0 = starts[r], a1 = starts[r + 1], b1 = starts[r + 2];
    if (spans_[a1].y != spans_[a0].y + 1) continue;
    std::size_t i = a0, j = a1;
    while (i < a1 && j < b1) {
      if (overlaps(spans_[i], spans_[j])) uf.unite(i, j);
      if (spans_[i].x1 < spans_[j].x1) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  std::vector<std::size_t> slot(n, n);
  std::vector<std::vector<Span>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (slot[root] == n) {
      slot[root] = groups.size();
      groups.emplace_back();
    }
    groups[slot[root]].push_back(spans_[i]);
  }
  std::vector<SpanSet> result;
  result.reserve(groups.size());
  for (auto& g : groups) {
    SpanSet part;
    part.spans_ = std::move(g);
    result.push_back(std::move(part));
  }
  return result;
}

std::uint64_t SpanSet::perimeter() const {
  // Two horizontal-boundary edges per span; vertical edges are the row
  // lengths minus adjacent-row overlap.
  std::uint64_t shared = 0;
  const auto starts = row_starts(spans_);
  for (std::size_t r = 0; r + 2 < starts.size(); ++r) {
    const std::size_t a0 = starts[r], a1 = starts[r + 1], b1 = starts[r + 2];
    if (spans_[a1].y != spans_[a0].y + 1) continue;
    std::size_t i = a0, j = a1;
    while (i < a1 && j < b1) {
      const std::int32_t lo = std::max(spans_[i].x0, spans_[j].x0);
      const std::int32_t hi = std::min(spans_[i].x1, spans_[j].x1);
      if (lo < hi) shared += static_cast<std::uint64_t>(hi - lo);
      if (spans_[i].x1 < spans_[j].x1) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  return 2 * spans_.size() + 2 * area() - 2 * shared;
}

std::pair<double, double> SpanSet::centroid() const {
  double sx = 0, sy = 0, n = 0;
  for (const Span& s : spans_) {
    const double len = s.length();
    sx += len * (0.5 * (static_cast<double>(s.x0) + s.x1));
    sy += len * (s.y + 0.5);
    n += len;
  }
  if (n == 0) return {0.0, 0.0};
  return {sx / n, sy / n};
}

RunLengthMask::RunLengthMask(BBox bbox, std::vector<std::uint32_t> runs)
    : bbox_(bbox), runs_(std::move(runs)) {
  if (bbox_.w <= 0 || bbox_.h <= 0) fail(ErrorCode::InvalidRle, "mask bbox must have positive extent");
  if (runs_.empty()) fail(ErrorCode::InvalidRle, "mask has no runs");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    if (i > 0 && runs_[i] == 0) fail(ErrorCode::InvalidRle, "interior zero-length run at index " + std::to_string(i));
    total += runs_[i];
    if (i % 2 == 1) area_ += runs_[i];
  }
  if (total != static_cast<std::uint64_t>(bbox_.area())) {
    fail(ErrorCode::InvalidRle, "run total " + std::to_string(total) + " != bbox area " + std::to_string(bbox_.area()));
  }
  if (area_ == 0) fail(ErrorCode::EmptyMask, "mask has no foreground pixels");
}

SpanSet RunLengthMask::spans() const {
  std::vector<Span> out;
  const std::uint64_t w = static_cast<std::uint64_t>(bbox_.w);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    std::uint64_t len = runs_[i];
    if (i % 2 == 1) {
      std::uint64_t p = pos;
      while (len > 0) {
        const std::uint64_t y = p / w, x = p % w;
        const std::uint64_t take = std::min(len, w - x);
        out.push_back({bbox_.y0 + static_cast<std::int32_t>(y), bbox_.x0 + static_cast<std::int32_t>(x),
                       bbox_.x0 + static_cast<std::int32_t>(x + take)});
        p += take;
        len -= take;
      }
    }
    pos += runs_[i];
  }
  return SpanSet(std::move(out));
}

RunLengthMask RunLengthMask::from_spans(const SpanSet& set) {
  if (set.empty()) fail(ErrorCode::EmptyMask, "cannot encode an empty pixel set");
  const BBox box = set.bbox();
  const std::uint64_t w = static_cast<std::uint64_t>(box.w);
  std::vector<std::uint32_t> runs;
  std::uint64_t cur = 0;
  for (const Span& s : set.spans()) {
    const std::uint64_t start = static_cast<std::uint64_t>(s.y - box.y0) * w + static_cast<std::uint64_t>(s.x0 - box.x0);
    const auto len = static_cast<std::uint32_t>(s.length());
    if (!runs.empty() && start == cur) {
      runs.back() += len;
    } else {
      runs.push_back(static_cast<std::uint32_t>(start - cur));
      runs.push_back(len);
    }
    cur = start + len;
  }
  const std::uint64_t total = static_cast<std::uint64_t>(box.area());
  if (cur < total) runs.push_back(static_cast<std::uint32_t>(total - cur));
  return RunLengthMask(box, std::move(runs));
}

RunLengthMask RunLengthMask::translated(std::int32_t dx, std::int32_t dy) const {
  RunLengthMask out = *this;
  out.bbox_.x0 += dx;
  out.bbox_.y0 += dy;
  return out;
}

RunLengthMask rle_encode(const Bitmap& bitmap, std::int32_t x0, std::int32_t y0) {
  if (bitmap.width <= 0 || bitmap.height <= 0) fail(ErrorCode::EmptyMask, "bitmap has no pixels");
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t count = 0;
  for (std::uint8_t bit : bitmap.bits) {
    const std::uint8_t v = bit != 0 ? 1 : 0;
    if (v != current) {
      runs.push_back(count);
      current = v;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return RunLengthMask({x0, y0, bitmap.width, bitmap.height}, std::move(runs));
}

Bitmap rle_decode(const RunLengthMask& mask) {
  const BBox& box = mask.bbox();
  Bitmap out(box.w, box.h);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < mask.runs().size(); ++i) {
    const std::size_t len = mask.runs()[i];
    if (i % 2 == 1) std::fill_n(out.bits.begin() + static_cast<std::ptrdiff_t>(pos), len, std::uint8_t{1});
    pos += len;
  }
  return out;
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Disjoint: return "disjoint";
    case Relation::Equal: return "equal";
    case Relation::AInsideB: return "a_inside_b";
    case Relation::BInsideA: return "b_inside_a";
    case Relation::Partial: return "partial";
  }
  return "?";
}

RelationResult mask_relation(const SpanSet& a, const SpanSet& b) {
  const std::uint64_t inter = a.intersection_area(b);
  const std::uint64_t area_a = a.area(), area_b = b.area();
  Relation rel = Relation::Partial;
  if (inter == 0) {
    rel = Relation::Disjoint;
  } else if (inter == area_a && inter == area_b) {
    rel = Relation::Equal;
  } else if (inter == area_a) {
    rel = Relation::AInsideB;
  } else if (inter == area_b) {
    rel = Relation::BInsideA;
  }
  return {rel, inter};
}

RelationResult mask_relation(const RunLengthMask& a, const RunLengthMask& b) {
  return mask_relation(a.spans(), b.spans());
}

RunLengthMask upsample2x(const RunLengthMask& mask) {
  std::vector<Span> out;
  const SpanSet src = mask.spans();
  out.reserve(src.spans().size() * 2);
  for (const Span& s : src.spans()) {
    out.push_back({2 * s.y, 2 * s.x0, 2 * s.x1});
    out.push_back({2 * s.y + 1, 2 * s.x0, 2 * s.x1});
  }
  return RunLengthMask::from_spans(SpanSet(std::move(out)));
}

}  // namespace mcae
