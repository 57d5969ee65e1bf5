#include "mcae/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "box_index.hpp"
#include "mcae/error.hpp"

namespace mcae {

void ConsistencyConfig::validate() const {
  if (!(iou_conflict_floor > 0.0 && iou_conflict_floor < iou_match && iou_match <= 1.0)) {
    fail(ErrorCode::Config, "consistency thresholds need 0 < iou_conflict_floor < iou_match <= 1");
  }
}

void FusionConfig::validate() const {
  if (min_fragment_px < 1) fail(ErrorCode::Config, "min_fragment_px must be >= 1");
}

std::uint64_t FusionResult::dropped_px() const {
  std::uint64_t total = 0;
  for (const auto& s : dropped) total += s.area();
  return total;
}

namespace {

void check_record(const MaskRecord& r) {
  if (r.area_px != r.mask.area()) {
    fail(ErrorCode::InvalidRle, "mask " + std::to_string(r.id) + ": area_px does not match its runs");
  }
}

struct Parent {
  std::vector<std::size_t> p;
  explicit Parent(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  std::size_t find(std::size_t x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  void join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

OverlapResolution resolve_overlap_tiles_detailed(const std::vector<MaskRecord>& fine, const TileGrid& grid,
                                                 const ConsistencyConfig& cfg) {
  cfg.validate();
  const std::size_t n = fine.size();
  std::vector<SpanSet> global(n);
  std::vector<BBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (fine[i].scale != Scale::Fine) {
      fail(ErrorCode::InvalidArgument, "mask " + std::to_string(fine[i].id) + " is not fine-scale");
    }
    check_record(fine[i]);
    global[i] = global_frame(fine[i], grid).spans();
    boxes[i] = global[i].bbox();
  }

  // Candidate pairs come from distinct tiles whose extents overlap.
  const detail::BoxIndex index(boxes);
  std::vector<std::vector<std::size_t>> duplicates(n);
  std::vector<char> conflicted(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const BBox tile_i = grid.tile_box(fine[i].tile);
    for (std::uint32_t j : index.query(boxes[i])) {
      if (j <= i || fine[j].tile == fine[i].tile) continue;
      const BBox tile_j = grid.tile_box(fine[j].tile);
      if (!detail::boxes_intersect(tile_i, tile_j)) continue;
      const std::int32_t x0 = std::max(tile_i.x0, tile_j.x0), y0 = std::max(tile_i.y0, tile_j.y0);
      const auto x1 = static_cast<std::int32_t>(std::min(tile_i.x1(), tile_j.x1()));
      const auto y1 = static_cast<std::int32_t>(std::min(tile_i.y1(), tile_j.y1()));
      const BBox shared{x0, y0, x1 - x0, y1 - y0};
      const SpanSet a = global[i].clipped(shared);
      const SpanSet b = global[j].clipped(shared);
      if (a.empty() || b.empty()) continue;
      const std::uint64_t inter = a.intersection_area(b);
      const double iou = static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
      if (iou >= cfg.iou_match) {
        duplicates[i].push_back(j);
      } else if (iou > cfg.iou_conflict_floor) {
        conflicted[i] = conflicted[j] = 1;
      }
    }
  }

  Parent groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (conflicted[i]) continue;
    for (std::size_t j : duplicates[i]) {
      if (!conflicted[j]) groups.join(i, j);
    }
  }
  std::map<std::size_t, std::size_t> best;  // group root -> survivor index
  for (std::size_t i = 0; i < n; ++i) {
    if (conflicted[i]) continue;
    const std::size_t root = groups.find(i);
    auto [it, inserted] = best.try_emplace(root, i);
    if (!inserted) {
      const std::size_t cur = it->second;
      const bool better = fine[i].area_px > fine[cur].area_px ||
                          (fine[i].area_px == fine[cur].area_px && fine[i].id < fine[cur].id);
      if (better) it->second = i;
    }
  }

  OverlapResolution out;
  std::vector<char> keep(n, 0);
  for (const auto& [root, idx] : best) keep[idx] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) {
      out.kept.push_back(fine[i]);
    } else if (conflicted[i]) {
      out.conflict_ids.push_back(fine[i].id);
    } else {
      out.duplicate_ids.push_back(fine[i].id);
    }
  }
  sort_canonical(out.kept);
  std::sort(out.duplicate_ids.begin(), out.duplicate_ids.end());
  std::sort(out.conflict_ids.begin(), out.conflict_ids.end());
  return out;
}

std::vector<MaskRecord> resolve_overlap_tiles(const std::vector<MaskRecord>& fine, const TileGrid& grid,
                                              const ConsistencyConfig& cfg) {
  return resolve_overlap_tiles_detailed(fine, grid, cfg).kept;
}

namespace {

struct Source {
  std::uint64_t id;
  SpanSet pixels;
  BBox box;
};

std::vector<Source> canonical_sources(const std::vector<MaskRecord>& records, Scale expected) {
  std::vector<Source> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.scale != expected) {
      fail(ErrorCode::InvalidArgument,
           "mask " + std::to_string(r.id) + " has scale " + std::string(to_string(r.scale)) + ", expected " +
               std::string(to_string(expected)));
    }
    check_record(r);
    SpanSet s = r.mask.spans();
    const BBox b = s.bbox();
    out.push_back({r.id, std::move(s), b});
  }
  std::sort(out.begin(), out.end(), [](const Source& a, const Source& b) {
    return std::tie(a.box.y0, a.box.x0, a.id) < std::tie(b.box.y0, b.box.x0, b.id);
  });
  return out;
}

std::vector<BBox> boxes_of(const std::vector<Source>& s) {
  std::vector<BBox> b;
  b.reserve(s.size());
  for (const auto& x : s) b.push_back(x.box);
  return b;
}

// Removes from each source the pixels claimed by sources earlier in
// canonical order.
std::vector<SpanSet> exclusive_parts(const std::vector<Source>& sources, const detail::BoxIndex& index) {
  std::vector<SpanSet> out(sources.size());
  const auto n = static_cast<std::int64_t>(sources.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    SpanSet rest = sources[i].pixels;
    for (std::uint32_t j : index.query(sources[i].box)) {
      if (j >= i) break;
      rest = rest.subtract(sources[j].pixels);
    }
    out[i] = std::move(rest);
  }
  return out;
}

struct Piece {
  SpanSet pixels;
  bool fragment;  // differs from its source mask
  std::uint64_t fine_id;
  std::uint64_t coarse_id;
  std::size_t component;
};

constexpr std::uint64_t kNone = ~std::uint64_t{0};

}  // namespace

FusionResult fuse_scales_detailed(const std::vector<MaskRecord>& fine, const std::vector<MaskRecord>& coarse,
                                  const FusionConfig& cfg) {
  cfg.validate();
  const std::vector<Source> fs = canonical_sources(fine, Scale::Fine);
  const std::vector<Source> cs = canonical_sources(coarse, Scale::Coarse);
  const detail::BoxIndex fine_index(boxes_of(fs));
  const detail::BoxIndex coarse_index(boxes_of(cs));
  const std::vector<SpanSet> fine_own = exclusive_parts(fs, fine_index);
  const std::vector<SpanSet> coarse_own = exclusive_parts(cs, coarse_index);

  // Fine masks: split by every coarse mask they touch.
  std::vector<std::vector<Piece>> fine_pieces(fs.size());
  const auto nf = static_cast<std::int64_t>(fs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < nf; ++i) {
    const Source& src = fs[i];
    SpanSet rest = fine_own[i];
    if (rest.empty()) continue;
    auto& pieces = fine_pieces[i];
    for (std::uint32_t k : coarse_index.query(rest.bbox())) {
      SpanSet inside = rest.intersect(coarse_own[k]);
      if (inside.empty()) continue;
      rest = rest.subtract(coarse_own[k]);
      pieces.push_back({std::move(inside), false, src.id, cs[k].id, 0});
    }
    if (!rest.empty()) pieces.push_back({std::move(rest), false, src.id, kNone, 0});
    for (auto& p : pieces) p.fragment = p.pixels.area() != src.pixels.area();
  }

  // Coarse residuals: what no fine mask claimed, split into 4-connected parts.
  std::vector<std::vector<Piece>> coarse_pieces(cs.size());
  const auto nc = static_cast<std::int64_t>(cs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t k = 0; k < nc; ++k) {
    const Source& src = cs[k];
    SpanSet rest = coarse_own[k];
    for (std::uint32_t i : fine_index.query(src.box)) rest = rest.subtract(fs[i].pixels);
    if (rest.empty()) continue;
    auto& pieces = coarse_pieces[k];
    if (rest.area() == src.pixels.area()) {
      pieces.push_back({std::move(rest), false, kNone, src.id, 0});
      continue;
    }
    auto parts = rest.components();
    for (std::size_t c = 0; c < parts.size(); ++c) {
      pieces.push_back({std::move(parts[c]), true, kNone, src.id, c});
    }
  }

  FusionResult result;
  std::vector<Piece> kept;
  auto collect = [&](std::vector<std::vector<Piece>>& all) {
    for (auto& list : all) {
      for (auto& p : list) {
        if (p.fragment && p.pixels.area() < cfg.min_fragment_px) {
          result.dropped.push_back(std::move(p.pixels));
        } else {
          kept.push_back(std::move(p));
        }
      }
    }
  };
  collect(fine_pieces);
  collect(coarse_pieces);

  std::vector<std::pair<BBox, std::size_t>> order;
  order.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) order.emplace_back(kept[i].pixels.bbox(), i);
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    const Piece& pa = kept[a.second];
    const Piece& pb = kept[b.second];
    return std::tie(a.first.y0, a.first.x0, pa.fine_id, pa.coarse_id, pa.component) <
           std::tie(b.first.y0, b.first.x0, pb.fine_id, pb.coarse_id, pb.component);
  });
  result.fused.reserve(kept.size());
  std::uint64_t next_id = 1;
  for (const auto& [box, idx] : order) {
    result.fused.push_back(
        MaskRecord::make(next_id++, {0, 0}, Scale::Fused, RunLengthMask::from_spans(kept[idx].pixels)));
  }
  return result;
}

std::vector<MaskRecord> fuse_scales(const std::vector<MaskRecord>& fine, const std::vector<MaskRecord>& coarse,
                                    const FusionConfig& cfg) {
  return fuse_scales_detailed(fine, coarse, cfg).fused;
}

std::vector<MaskRecord> to_mosaic_frame(const std::vector<MaskRecord>& records, const TileGrid& grid) {
  std::vector<MaskRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(MaskRecord::make(r.id, {0, 0}, r.scale, global_frame(r, grid)));
  return out;
}

std::vector<MaskRecord> coarse_to_fine_frame(const std::vector<MaskRecord>& coarse, const TileGrid& coarse_grid) {
  std::vector<MaskRecord> out;
  out.reserve(coarse.size());
  for (const auto& r : coarse) {
    out.push_back(MaskRecord::make(r.id, {0, 0}, r.scale, upsample2x(global_frame(r, coarse_grid))));
  }
  return out;
}

std::vector<MaskRecord> anchor_all(const std::vector<MaskRecord>& mosaic_records, const TileGrid& grid) {
  std::vector<MaskRecord> out;
  out.reserve(mosaic_records.size());
  for (const auto& r : mosaic_records) out.push_back(anchor_to_grid(r.id, r.scale, r.mask, grid));
  sort_canonical(out);
  return out;
}

}  // namespace mcae
