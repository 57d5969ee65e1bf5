#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mcae/annotation_store.hpp"
#include "mcae/config.hpp"
#include "mcae/error.hpp"

namespace mcae {

inline constexpr const char* kVersion = "0.3.0";

/// Run directory layout, relative to the run root.
namespace run_files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kResolved = "masks/fine_resolved.jsonl";
inline constexpr const char* kFused = "masks/fused.jsonl";
inline constexpr const char* kFeatures = "features/features.mcft";
inline constexpr const char* kClusters = "clusters/clusters.jsonl";
inline constexpr const char* kCandidates = "clusters/candidates.jsonl";
inline constexpr const char* kSession = "session";
inline constexpr const char* kSparse = "session/sparse.png";
inline constexpr const char* kCuration = "session/curation";
inline constexpr const char* kReport = "eval/report.json";
}  // namespace run_files

/// Stage failure; keeps the underlying error code.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "' failed: " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::size_t fine_in = 0;
  std::size_t fine_kept = 0;
  std::size_t fused = 0;
  std::size_t stage1 = 0;
  std::size_t stage2 = 0;
  std::size_t residual = 0;
  std::size_t suggested = 0;
  std::uint64_t painted_px = 0;
  std::uint64_t agree_px = 0;
  std::size_t regions = 0;
  std::size_t sampled_tiles = 0;
  std::string manifest_sha256;
};

/// Labels every cluster with the dominant ground-truth class of its members
/// and excludes members whose own majority class differs.
void auto_label_from_truth(SessionStore& store, const LabelRaster& truth, const std::string& annotator = "auto-gt");

/// Runs resolve, fuse, features, cluster, session, export, curate and
/// evaluate on the scene at cfg.paths.scene, writing under cfg.paths.run.
RunSummary run_pipeline(const EngineConfig& cfg);

}  // namespace mcae
