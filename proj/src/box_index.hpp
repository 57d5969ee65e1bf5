#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mcae/rle.hpp"

namespace mcae::detail {

inline bool boxes_intersect(const BBox& a, const BBox& b) {
  return a.x0 < b.x1() && b.x0 < a.x1() && a.y0 < b.y1() && b.y0 < a.y1();
}

/// Uniform-bucket index over boxes; query returns ascending item indices
/// whose boxes intersect the probe.
class BoxIndex {
 public:
  explicit BoxIndex(const std::vector<BBox>& boxes, std::int32_t cell = 128) : boxes_(boxes), cell_(cell) {
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      for_cells(boxes_[i], [&](std::int64_t key) { buckets_[key].push_back(static_cast<std::uint32_t>(i)); });
    }
  }

  std::vector<std::uint32_t> query(const BBox& probe) const {
    std::vector<std::uint32_t> out;
    for_cells(probe, [&](std::int64_t key) {
      auto it = buckets_.find(key);
      if (it == buckets_.end()) return;
      for (std::uint32_t i : it->second) {
        if (boxes_intersect(boxes_[i], probe)) out.push_back(i);
      }
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  template <typename F>
  void for_cells(const BBox& b, F&& f) const {
    if (b.w <= 0 || b.h <= 0) return;
    const std::int64_t cx0 = floor_div(b.x0), cx1 = floor_div(static_cast<std::int64_t>(b.x1() - 1));
    const std::int64_t cy0 = floor_div(b.y0), cy1 = floor_div(static_cast<std::int64_t>(b.y1() - 1));
    for (std::int64_t cy = cy0; cy <= cy1; ++cy) {
      for (std::int64_t cx = cx0; cx <= cx1; ++cx) f((cy << 32) ^ (cx & 0xffffffff));
    }
  }
  std::int64_t floor_div(std::int64_t v) const { return v >= 0 ? v / cell_ : -((-v + cell_ - 1) / cell_); }

  std::vector<BBox> boxes_;
  std::int32_t cell_;
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> buckets_;
};

}  // namespace mcae::detail
