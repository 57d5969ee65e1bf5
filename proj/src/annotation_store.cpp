#include "mcae/annotation_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "mcae/error.hpp"

namespace mcae {

using nlohmann::json;

std::string decision_to_json(const ClusterDecision& d) {
  json j = {{"cluster_id", d.cluster_id},
            {"verdict", d.verdict == Verdict::Labeled ? "labeled" : "rejected"},
            {"excluded_member_ids", d.excluded_member_ids},
            {"annotator", d.annotator},
            {"timestamp", d.timestamp}};
  if (d.verdict == Verdict::Labeled) j["class_id"] = d.class_id;
  return j.dump();
}

ClusterDecision decision_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    ClusterDecision d;
    d.cluster_id = j.at("cluster_id").get<std::uint64_t>();
    const std::string v = j.at("verdict").get<std::string>();
    if (v == "labeled") {
      d.verdict = Verdict::Labeled;
      d.class_id = j.at("class_id").get<ClassId>();
    } else if (v == "rejected") {
      d.verdict = Verdict::Rejected;
    } else {
      fail(ErrorCode::Parse, "unknown verdict '" + v + "'");
    }
    d.excluded_member_ids = j.value("excluded_member_ids", std::vector<std::uint64_t>{});
    d.annotator = j.value("annotator", std::string{});
    d.timestamp = j.value("timestamp", std::int64_t{0});
    return d;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad decision record: ") + e.what());
  }
}

CostReport cost_report(std::uint64_t n_masks, std::uint64_t n_clusters) {
  if (n_clusters == 0) fail(ErrorCode::InvalidArgument, "cost report needs at least one cluster");
  CostReport r;
  r.n_masks = n_masks;
  r.n_clusters = n_clusters;
  r.pixel_cost = 4 * n_masks;
  r.mask_cost = n_masks;
  r.mcae_cost = n_clusters;
  r.avg_masks_per_cluster = static_cast<double>(n_masks) / static_cast<double>(n_clusters);
  return r;
}

SessionInfo SessionInfo::load(const std::filesystem::path& session_dir) {
  const auto path = session_dir / kSessionFile;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "no session at " + session_dir.string());
  try {
    const json j = json::parse(in);
    SessionInfo s;
    s.schema = j.at("schema").get<std::string>();
    const auto& g = j.at("grid");
    s.grid = TileGrid(g.at("tile_size").get<std::int32_t>(), g.at("rows").get<std::int32_t>(),
                      g.at("cols").get<std::int32_t>(), g.value("overlap_ratio", 0.0));
    s.pixel_size_m = j.at("pixel_size_m").get<double>();
    s.clusters_file = j.at("clusters_file").get<std::string>();
    s.masks_file = j.at("masks_file").get<std::string>();
    s.images_dir = j.value("images_dir", std::string{});
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "bad session file " + path.string() + ": " + e.what());
  }
}

void SessionInfo::save(const std::filesystem::path& session_dir) const {
  std::filesystem::create_directories(session_dir);
  json j = {{"schema", schema},
            {"grid", {{"tile_size", grid.tile_size}, {"rows", grid.rows}, {"cols", grid.cols}, {"overlap_ratio", grid.overlap_ratio}}},
            {"pixel_size_m", pixel_size_m},
            {"clusters_file", clusters_file.generic_string()},
            {"masks_file", masks_file.generic_string()},
            {"images_dir", images_dir.generic_string()}};
  std::ofstream out(session_dir / kSessionFile, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "cannot write session file in " + session_dir.string());
}

SessionStore::SessionStore(ClassSchema schema, TileGrid grid, double pixel_size_m,
                           std::vector<ClusterCandidate> clusters, std::vector<MaskRecord> masks,
                           std::optional<std::filesystem::path> log_path)
    : schema_(std::move(schema)),
      grid_(grid),
      pixel_size_m_(pixel_size_m),
      clusters_(std::move(clusters)),
      masks_(std::move(masks)),
      log_path_(std::move(log_path)) {
  std::sort(clusters_.begin(), clusters_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < masks_.size(); ++i) {
    if (!mask_index_.emplace(masks_[i].id, i).second) {
      fail(ErrorCode::DuplicateId, "duplicate mask id " + std::to_string(masks_[i].id));
    }
  }
  std::set<std::uint64_t> seen_members;
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    if (!cluster_index_.emplace(clusters_[i].id, i).second) {
      fail(ErrorCode::DuplicateId, "duplicate cluster id " + std::to_string(clusters_[i].id));
    }
    for (std::uint64_t m : clusters_[i].member_ids) {
      if (!mask_index_.contains(m)) fail(ErrorCode::UnknownMask, "cluster member " + std::to_string(m) + " not in mask set");
      if (!seen_members.insert(m).second) {
        fail(ErrorCode::Invariant, "mask " + std::to_string(m) + " belongs to two clusters");
      }
    }
  }
}

SessionStore SessionStore::open(const std::filesystem::path& session_dir) {
  const SessionInfo info = SessionInfo::load(session_dir);
  const auto log_path = session_dir / kDecisionLog;
  SessionStore store(ClassSchema::by_name(info.schema), info.grid, info.pixel_size_m,
                     read_clusters(session_dir / info.clusters_file), read_mask_set(session_dir / info.masks_file),
                     std::nullopt);
  if (std::filesystem::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (pos < content.size()) {
      const std::size_t nl = content.find('\n', pos);
      if (nl == std::string::npos) break;  // incomplete trailing line
      const std::string_view line(content.data() + pos, nl - pos);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
        const ClusterDecision d = decision_from_json(line);
        store.validate(d);
        store.apply(d);
      }
      pos = nl + 1;
      good_end = pos;
    }
    if (good_end != content.size()) std::filesystem::resize_file(log_path, good_end);
  }
  store.log_path_ = log_path;
  return store;
}

const ClusterCandidate* SessionStore::find_cluster(std::uint64_t id) const {
  auto it = cluster_index_.find(id);
  return it == cluster_index_.end() ? nullptr : &clusters_[it->second];
}

const MaskRecord* SessionStore::find_mask(std::uint64_t id) const {
  auto it = mask_index_.find(id);
  return it == mask_index_.end() ? nullptr : &masks_[it->second];
}

void SessionStore::validate(const ClusterDecision& d) const {
  const ClusterCandidate* c = find_cluster(d.cluster_id);
  if (!c) fail(ErrorCode::UnknownCluster, "unknown cluster " + std::to_string(d.cluster_id));
  for (std::uint64_t m : d.excluded_member_ids) {
    if (!std::binary_search(c->member_ids.begin(), c->member_ids.end(), m)) {
      fail(ErrorCode::NotAMember, "mask " + std::to_string(m) + " is not a member of cluster " + std::to_string(c->id));
    }
  }
  if (d.verdict == Verdict::Labeled && !schema_.valid(d.class_id)) {
    fail(ErrorCode::InvalidClass, "class id " + std::to_string(d.class_id) + " not in schema " + schema_.name());
  }
}

void SessionStore::apply(const ClusterDecision& d) {
  ClusterDecision normalized = d;
  std::sort(normalized.excluded_member_ids.begin(), normalized.excluded_member_ids.end());
  normalized.excluded_member_ids.erase(
      std::unique(normalized.excluded_member_ids.begin(), normalized.excluded_member_ids.end()),
      normalized.excluded_member_ids.end());
  effective_[d.cluster_id] = normalized;
  log_.push_back(std::move(normalized));
}

void SessionStore::record_decision(const ClusterDecision& decision) {
  validate(decision);
  if (log_path_) {
    const std::string line = decision_to_json(decision) + "\n";
    const int fd = ::open(log_path_->c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) fail(ErrorCode::Io, "cannot open decision log " + log_path_->string());
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
      if (n <= 0) {
        ::close(fd);
        fail(ErrorCode::Io, "short write to decision log");
      }
      written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }
  apply(decision);
}

Progress SessionStore::progress() const {
  Progress p;
  for (const auto& c : clusters_) {
    auto& [total, decided] = p.per_stage[c.stage];
    ++total;
    const auto it = effective_.find(c.id);
    if (it == effective_.end()) {
      ++p.remaining;
      continue;
    }
    ++decided;
    ++p.decided;
    if (it->second.verdict == Verdict::Labeled) {
      const std::uint64_t n = c.member_ids.size() - it->second.excluded_member_ids.size();
      p.masks_labeled += n;
      p.masks_per_class[it->second.class_id] += n;
    }
  }
  return p;
}

CostReport SessionStore::cost() const {
  std::uint64_t n_masks = 0;
  for (const auto& c : clusters_) n_masks += c.member_ids.size();
  return cost_report(n_masks, clusters_.size());
}

LabelRaster export_sparse(const SessionStore& store, const TileGrid& grid) {
  LabelRaster out(grid.mosaic_width(), grid.mosaic_height(), kIgnoreId, store.pixel_size_m());
  const BBox bounds{0, 0, out.width, out.height};
  for (const auto& [cluster_id, d] : store.effective()) {
    if (d.verdict != Verdict::Labeled) continue;
    const ClusterCandidate* c = store.find_cluster(cluster_id);
    for (std::uint64_t m : c->member_ids) {
      if (std::binary_search(d.excluded_member_ids.begin(), d.excluded_member_ids.end(), m)) continue;
      const SpanSet pixels = global_frame(*store.find_mask(m), grid).spans().clipped(bounds);
      for (const Span& s : pixels.spans()) {
        std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(s.y) * out.width + s.x0),
                    s.length(), d.class_id);
      }
    }
  }
  return out;
}

LabelRaster export_sparse(const SessionStore& store) { return export_sparse(store, store.grid()); }

}  // namespace mcae
