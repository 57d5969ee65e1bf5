#include "mcae/clustering.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <string>

#include "mcae/error.hpp"
#include "mcae/kernels.hpp"

namespace mcae {

using nlohmann::json;

DbscanLabels dbscan(const std::vector<DbscanPoint>& points, double eps, std::uint32_t min_pts) {
  const std::size_t n = points.size();
  DbscanLabels labels(n);
  if (n == 0) return labels;
  const std::size_t dim = points.front().vec.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a].id < points[b].id; });

  std::vector<float> matrix(n * dim);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& v = points[order[r]].vec;
    if (v.size() != dim) fail(ErrorCode::DimMismatch, "dbscan point " + std::to_string(points[order[r]].id) + " dim differs");
    std::copy(v.begin(), v.end(), matrix.begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  // Neighbour lists are in canonical (sorted) index space.
  const auto neighbors = kernels::omp::eps_neighbors({matrix.data(), n, dim}, eps);

  std::vector<std::optional<std::uint32_t>> canon(n);
  std::vector<char> visited(n, 0);
  std::uint32_t next_label = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (visited[p]) continue;
    visited[p] = 1;
    if (neighbors[p].size() < min_pts) continue;  // noise unless reached later
    const std::uint32_t label = next_label++;
    canon[p] = label;
    std::deque<std::uint32_t> queue(neighbors[p].begin(), neighbors[p].end());
    while (!queue.empty()) {
      const std::uint32_t q = queue.front();
      queue.pop_front();
      if (!canon[q]) canon[q] = label;
      if (visited[q]) continue;
      visited[q] = 1;
      if (neighbors[q].size() >= min_pts) {
        for (std::uint32_t r : neighbors[q]) {
          if (!visited[r] || !canon[r]) queue.push_back(r);
        }
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r) labels[order[r]] = canon[r];
  return labels;
}

ClassId majority_vote_label(const LabelRaster& reference, const RunLengthMask& mask) {
  std::array<std::uint64_t, 256> counts{};
  const SpanSet clipped = mask.spans().clipped({0, 0, reference.width, reference.height});
  for (const Span& s : clipped.spans()) {
    for (std::int32_t x = s.x0; x < s.x1; ++x) ++counts[reference.at(x, s.y)];
  }
  ClassId best = kIgnoreId;
  std::uint64_t best_count = 0;
  for (std::size_t c = 0; c < kIgnoreId; ++c) {
    if (counts[c] > best_count) {
      best_count = counts[c];
      best = static_cast<ClassId>(c);
    }
  }
  return best;
}

std::string_view to_string(Stage s) { return s == Stage::Small ? "small" : "large"; }

Stage parse_stage(std::string_view s) {
  if (s == "small") return Stage::Small;
  if (s == "large") return Stage::Large;
  fail(ErrorCode::Parse, "unknown stage '" + std::string(s) + "'");
}

void ClusterConfig::validate() const {
  if (!(eps > 0.0 && eps < 2.0)) fail(ErrorCode::Config, "cluster eps must be in (0, 2)");
  if (min_pts < 2) fail(ErrorCode::Config, "cluster min_pts must be >= 2");
  if (!(purity_threshold > 0.5 && purity_threshold <= 1.0)) fail(ErrorCode::Config, "purity threshold must be in (0.5, 1]");
  if (small_window < 1 || small_window >= large_window) fail(ErrorCode::Config, "need 1 <= small_window < large_window");
}

std::vector<ClusterCandidate> HierarchicalResult::all() const {
  std::vector<ClusterCandidate> out = stage1;
  out.insert(out.end(), stage2.begin(), stage2.end());
  return out;
}

std::vector<ClusterCandidate> window_cluster(const std::vector<MaskRecord>& masks, const FeatureTable& features,
                                             const LabelRaster& reference, const TileGrid& grid,
                                             const ClusterConfig& cfg, Stage stage, std::uint64_t first_id) {
  cfg.validate();
  const std::int32_t span = stage == Stage::Small ? cfg.small_window : cfg.large_window;

  struct Member {
    std::size_t index;
    RunLengthMask global;
  };
  std::map<WindowPos, std::vector<Member>> windows;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!features.find(masks[i].id)) {
      fail(ErrorCode::MissingFeature, "mask " + std::to_string(masks[i].id) + " has no feature vector");
    }
    RunLengthMask g = global_frame(masks[i], grid);
    const auto [cx, cy] = g.spans().centroid();
    const TilePos t = grid.tile_at(cx, cy);
    const WindowPos w{(t.row / span) * span, (t.col / span) * span, span};
    windows[w].push_back({i, std::move(g)});
  }

  // Windows are independent; each produces its candidates in dbscan order.
  std::vector<std::pair<WindowPos, std::vector<Member>*>> work;
  for (auto& [pos, members] : windows) work.emplace_back(pos, &members);
  std::vector<std::vector<ClusterCandidate>> per_window(work.size());
  std::vector<std::string> errors(work.size());
  const auto nw = static_cast<std::int64_t>(work.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t w = 0; w < nw; ++w) {
    try {
      const auto& members = *work[w].second;
      std::vector<DbscanPoint> pts;
      pts.reserve(members.size());
      for (const auto& m : members) pts.push_back({masks[m.index].id, *features.find(masks[m.index].id)});
      const DbscanLabels labels = dbscan(pts, cfg.eps, cfg.min_pts);
      std::map<std::uint32_t, std::vector<std::size_t>> groups;
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) groups[*labels[k]].push_back(k);
      }
      for (const auto& [label, idx] : groups) {
        if (idx.size() < cfg.min_pts) continue;
        ClusterCandidate c;
        c.stage = stage;
        c.window = work[w].first;
        std::array<std::uint64_t, 256> votes{};
        for (std::size_t k : idx) {
          c.member_ids.push_back(masks[members[k].index].id);
          ++votes[majority_vote_label(reference, members[k].global)];
        }
        std::sort(c.member_ids.begin(), c.member_ids.end());
        std::uint64_t best = 0;
        for (std::size_t cls = 0; cls < kIgnoreId; ++cls) {
          if (votes[cls] > best) {
            best = votes[cls];
            c.dominant_class = static_cast<ClassId>(cls);
          }
        }
        c.purity = static_cast<double>(best) / static_cast<double>(idx.size());
        c.suggested = c.dominant_class != kIgnoreId && c.purity >= cfg.purity_threshold;
        per_window[w].push_back(std::move(c));
      }
    } catch (const std::exception& e) {
      errors[w] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) fail(ErrorCode::InvalidArgument, e);
  }
  std::vector<ClusterCandidate> out;
  std::uint64_t next = first_id;
  for (auto& list : per_window) {
    for (auto& c : list) {
      c.id = next++;
      out.push_back(std::move(c));
    }
  }
  return out;
}

HierarchicalResult hierarchical_cluster(const std::vector<MaskRecord>& masks, const FeatureTable& features,
                                        const LabelRaster& reference, const TileGrid& grid,
                                        const ClusterConfig& cfg) {
  HierarchicalResult result;
  std::set<std::uint64_t> taken;
  auto small = window_cluster(masks, features, reference, grid, cfg, Stage::Small, 1);
  // Stage-2 ids continue after every stage-1 id, suggested or not.
  const std::uint64_t next_id = small.size() + 1;
  for (auto& c : small) {
    if (!c.suggested) continue;
    taken.insert(c.member_ids.begin(), c.member_ids.end());
    result.stage1.push_back(std::move(c));
  }
  std::vector<MaskRecord> rest;
  for (const auto& m : masks) {
    if (!taken.contains(m.id)) rest.push_back(m);
  }
  for (auto& c : window_cluster(rest, features, reference, grid, cfg, Stage::Large, next_id)) {
    if (!c.suggested) continue;
    taken.insert(c.member_ids.begin(), c.member_ids.end());
    result.stage2.push_back(std::move(c));
  }
  for (const auto& m : masks) {
    if (!taken.contains(m.id)) result.residual.push_back(m.id);
  }
  std::sort(result.residual.begin(), result.residual.end());
  return result;
}

std::string cluster_candidate_to_json(const ClusterCandidate& c) {
  json j = {{"id", c.id},
            {"stage", to_string(c.stage)},
            {"window", {c.window.row0, c.window.col0, c.window.span}},
            {"member_ids", c.member_ids},
            {"dominant_class", c.dominant_class},
            {"purity", c.purity},
            {"suggested", c.suggested}};
  return j.dump();
}

ClusterCandidate cluster_candidate_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    ClusterCandidate c;
    c.id = j.at("id").get<std::uint64_t>();
    c.stage = parse_stage(j.at("stage").get<std::string>());
    const auto w = j.at("window");
    c.window = {w.at(0).get<std::int32_t>(), w.at(1).get<std::int32_t>(), w.at(2).get<std::int32_t>()};
    c.member_ids = j.at("member_ids").get<std::vector<std::uint64_t>>();
    c.dominant_class = j.at("dominant_class").get<ClassId>();
    c.purity = j.at("purity").get<double>();
    c.suggested = j.at("suggested").get<bool>();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad cluster record: ") + e.what());
  }
}

void write_clusters(const std::filesystem::path& path, const std::vector<ClusterCandidate>& clusters) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& c : clusters) out << cluster_candidate_to_json(c) << '\n';
}

std::vector<ClusterCandidate> read_clusters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open cluster file " + path.string());
  std::vector<ClusterCandidate> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(cluster_candidate_from_json(line));
  }
  return out;
}

}  // namespace mcae
