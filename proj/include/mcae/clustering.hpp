#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mcae/features.hpp"
#include "mcae/mask_record.hpp"
#include "mcae/raster.hpp"

namespace mcae {

struct DbscanPoint {
  std::uint64_t id = 0;
  std::span<const float> vec;
};

/// Cluster label per input point (input order); nullopt = noise.
using DbscanLabels = std::vector<std::optional<std::uint32_t>>;

/// DBSCAN under cosine distance (1 - dot, inclusive eps). Points are visited
/// in ascending id order; clusters are numbered in creation order and a
/// border point joins the first cluster that reaches it.
DbscanLabels dbscan(const std::vector<DbscanPoint>& points, double eps, std::uint32_t min_pts);

/// Most frequent non-ignore class under the mask (ties: smaller id), or
/// ignore when every covered pixel is ignore. Pixels outside the raster
/// are skipped.
ClassId majority_vote_label(const LabelRaster& reference, const RunLengthMask& mask);

enum class Stage { Small, Large };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

struct ClusterConfig {
  double eps = 0.15;
  std::uint32_t min_pts = 5;
  double purity_threshold = 0.90;
  std::int32_t small_window = 3;
  std::int32_t large_window = 5;
  void validate() const;
};

struct WindowPos {
  std::int32_t row0 = 0;
  std::int32_t col0 = 0;
  std::int32_t span = 0;
  auto operator<=>(const WindowPos&) const = default;
};

struct ClusterCandidate {
  std::uint64_t id = 0;
  Stage stage = Stage::Small;
  WindowPos window;
  std::vector<std::uint64_t> member_ids;  ///< ascending
  ClassId dominant_class = kIgnoreId;
  double purity = 0.0;
  bool suggested = false;
};

/// Clusters masks (mosaic geometry via grid) inside non-overlapping windows
/// of the stage's span. Every cluster with at least min_pts members is
/// returned, suggested or not; ids start at first_id in window order.
std::vector<ClusterCandidate> window_cluster(const std::vector<MaskRecord>& masks, const FeatureTable& features,
                                             const LabelRaster& reference, const TileGrid& grid,
                                             const ClusterConfig& cfg, Stage stage, std::uint64_t first_id = 1);

struct HierarchicalResult {
  std::vector<ClusterCandidate> stage1;  ///< suggested small-window clusters
  std::vector<ClusterCandidate> stage2;  ///< suggested large-window clusters
  std::vector<std::uint64_t> residual;   ///< ascending mask ids in neither
  std::vector<ClusterCandidate> all() const;
};

HierarchicalResult hierarchical_cluster(const std::vector<MaskRecord>& masks, const FeatureTable& features,
                                        const LabelRaster& reference, const TileGrid& grid,
                                        const ClusterConfig& cfg);

std::string cluster_candidate_to_json(const ClusterCandidate& c);
ClusterCandidate cluster_candidate_from_json(std::string_view line);
void write_clusters(const std::filesystem::path& path, const std::vector<ClusterCandidate>& clusters);
std::vector<ClusterCandidate> read_clusters(const std::filesystem::path& path);

}  // namespace mcae
