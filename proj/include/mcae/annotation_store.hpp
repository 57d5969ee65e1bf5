#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcae/clustering.hpp"
#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"
#include "mcae/schema.hpp"

namespace mcae {

enum class Verdict { Labeled, Rejected };

struct ClusterDecision {
  std::uint64_t cluster_id = 0;
  Verdict verdict = Verdict::Rejected;
  ClassId class_id = kIgnoreId;  ///< meaningful only when labeled
  std::vector<std::uint64_t> excluded_member_ids;
  std::string annotator;
  std::int64_t timestamp = 0;
};

std::string decision_to_json(const ClusterDecision& d);
ClusterDecision decision_from_json(std::string_view line);

/// Action counts for labeling n_masks objects: 4 clicks per object for
/// pixel-level, 1 per object for mask-level, 1 per cluster here.
struct CostReport {
  std::uint64_t n_masks = 0;
  std::uint64_t n_clusters = 0;
  std::uint64_t pixel_cost = 0;
  std::uint64_t mask_cost = 0;
  std::uint64_t mcae_cost = 0;
  double avg_masks_per_cluster = 0.0;
};

CostReport cost_report(std::uint64_t n_masks, std::uint64_t n_clusters);

/// Files a session directory points at, stored as session.json.
struct SessionInfo {
  std::string schema = "oem8";
  TileGrid grid;
  double pixel_size_m = 1.0;
  std::filesystem::path clusters_file;  ///< relative to the session dir
  std::filesystem::path masks_file;
  std::filesystem::path images_dir;     ///< optional, for thumbnails

  static SessionInfo load(const std::filesystem::path& session_dir);
  void save(const std::filesystem::path& session_dir) const;
};

struct Progress {
  std::uint64_t decided = 0;
  std::uint64_t remaining = 0;
  std::uint64_t masks_labeled = 0;
  std::map<Stage, std::pair<std::uint64_t, std::uint64_t>> per_stage;  ///< total, decided
  std::map<ClassId, std::uint64_t> masks_per_class;
};

/// Cluster decisions over an immutable cluster/mask set. The decision log is
/// append-only; the effective decision per cluster is the last one written.
class SessionStore {
 public:
  SessionStore(ClassSchema schema, TileGrid grid, double pixel_size_m, std::vector<ClusterCandidate> clusters,
               std::vector<MaskRecord> masks, std::optional<std::filesystem::path> log_path = std::nullopt);

  /// Loads a session directory and replays its decision log. A trailing
  /// partial line (interrupted write) is truncated away.
  static SessionStore open(const std::filesystem::path& session_dir);

  /// Validates, appends durably (when backed by a log) and applies.
  void record_decision(const ClusterDecision& decision);

  const ClassSchema& schema() const noexcept { return schema_; }
  const TileGrid& grid() const noexcept { return grid_; }
  double pixel_size_m() const noexcept { return pixel_size_m_; }
  const std::vector<ClusterCandidate>& clusters() const noexcept { return clusters_; }
  const ClusterCandidate* find_cluster(std::uint64_t id) const;
  const MaskRecord* find_mask(std::uint64_t id) const;
  const std::map<std::uint64_t, ClusterDecision>& effective() const noexcept { return effective_; }
  const std::vector<ClusterDecision>& log() const noexcept { return log_; }

  Progress progress() const;
  CostReport cost() const;

 private:
  void validate(const ClusterDecision& d) const;
  void apply(const ClusterDecision& d);

  ClassSchema schema_;
  TileGrid grid_;
  double pixel_size_m_;
  std::vector<ClusterCandidate> clusters_;  ///< ascending id
  std::vector<MaskRecord> masks_;
  std::unordered_map<std::uint64_t, std::size_t> cluster_index_;
  std::unordered_map<std::uint64_t, std::size_t> mask_index_;
  std::map<std::uint64_t, ClusterDecision> effective_;
  std::vector<ClusterDecision> log_;
  std::optional<std::filesystem::path> log_path_;
};

/// Mosaic-sized raster: non-excluded members of labeled clusters carry their
/// class, everything else is ignore.
LabelRaster export_sparse(const SessionStore& store, const TileGrid& grid);
LabelRaster export_sparse(const SessionStore& store);

inline constexpr const char* kSessionFile = "session.json";
inline constexpr const char* kDecisionLog = "decisions.jsonl";

}  // namespace mcae
