#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "mcae/annotation_store.hpp"
#include "mcae/raster.hpp"

namespace mcae {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// The annotation API independent of any HTTP transport. Reads run
/// concurrently under a shared lock; decisions are serialized through a
/// single writer thread and acknowledged once appended to the log.
class AnnotateService {
 public:
  /// Opens the session at session_dir; a directory without session.json
  /// yields a service that answers 409 on every session endpoint.
  explicit AnnotateService(const std::filesystem::path& session_dir);
  ~AnnotateService();

  AnnotateService(const AnnotateService&) = delete;
  AnnotateService& operator=(const AnnotateService&) = delete;

  bool has_session() const noexcept { return store_ != nullptr; }

  HttpResponse next_cluster(std::optional<std::uint64_t> after) const;
  HttpResponse cluster(std::uint64_t id) const;
  HttpResponse post_decision(std::uint64_t cluster_id, const std::string& body);
  HttpResponse thumbnail(std::uint64_t mask_id) const;
  HttpResponse progress() const;
  HttpResponse export_sparse_png() const;
  HttpResponse schema() const;

  /// Thumbnail PNG for a mask, also used by tests.
  std::vector<std::uint8_t> render_thumbnail(std::uint64_t mask_id) const;

 private:
  struct Writer;

  std::string cluster_view(const ClusterCandidate& c) const;
  std::string progress_json() const;
  const RgbImage& tile_image(TilePos t) const;

  std::filesystem::path session_dir_;
  std::filesystem::path images_dir_;
  std::unique_ptr<SessionStore> store_;
  mutable std::shared_mutex mutex_;
  std::unique_ptr<Writer> writer_;

  mutable std::mutex cache_mutex_;
  mutable std::map<TilePos, RgbImage> tiles_;
  mutable std::map<std::uint64_t, std::vector<std::uint8_t>> thumbs_;
};

/// JSON error body {"error": code, "message": text}.
HttpResponse error_response(int status, const std::string& code, const std::string& message);

}  // namespace mcae

namespace httplib {
class Server;
}

namespace mcae {

/// HTTP binding: API under /api, static UI assets (or a placeholder page)
/// from /.
class ApiServer {
 public:
  ApiServer(AnnotateService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~ApiServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires a prior bind().
  void run();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8731;
  std::optional<std::filesystem::path> ui_dir;
};

/// Binds and serves until the process is stopped.
void serve(AnnotateService& service, const ServeOptions& options);

}  // namespace mcae
