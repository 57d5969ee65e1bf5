#include "mcae/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <thread>

#include "mcae/digest.hpp"
#include "mcae/error.hpp"
#include "mcae/image_io.hpp"
#include "mcae/mask_record.hpp"

namespace mcae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kThumbDir = "thumbnails";
constexpr Rgb kContour{255, 255, 0};

HttpResponse json_response(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

std::string api_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownCluster: return "unknown_cluster";
    case ErrorCode::UnknownMask: return "unknown_mask";
    case ErrorCode::NotAMember: return "not_a_member";
    case ErrorCode::InvalidClass: return "invalid_class";
    case ErrorCode::Io: return "io_error";
    default: return "internal";
  }
}

HttpResponse no_session() { return error_response(409, "no_session", "no annotation session is open"); }

// Pixels within two steps of the mask boundary.
SpanSet contour(const SpanSet& mask) {
  SpanSet inner = mask;
  for (int i = 0; i < 2; ++i) {
    SpanSet eroded = inner;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) eroded = eroded.intersect(inner.translated(dx, dy));
    inner = eroded;
  }
  return mask.subtract(inner);
}

}  // namespace

HttpResponse error_response(int status, const std::string& code, const std::string& message) {
  return json_response({{"error", code}, {"message", message}}, status);
}

struct AnnotateService::Writer {
  struct Job {
    ClusterDecision decision;
    std::promise<void> done;
  };

  explicit Writer(AnnotateService& svc) : service(svc), thread([this] { run(); }) {}
  ~Writer() {
    {
      std::lock_guard lock(m);
      stop = true;
    }
    cv.notify_all();
    thread.join();
  }

  std::future<void> submit(ClusterDecision d) {
    Job job{std::move(d), {}};
    auto fut = job.done.get_future();
    {
      std::lock_guard lock(m);
      queue.push_back(std::move(job));
    }
    cv.notify_one();
    return fut;
  }

  void run() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(m);
        cv.wait(lock, [&] { return stop || !queue.empty(); });
        if (queue.empty()) return;
        job = std::move(queue.front());
        queue.pop_front();
      }
      try {
        std::unique_lock lock(service.mutex_);
        service.store_->record_decision(job.decision);
        job.done.set_value();
      } catch (...) {
        job.done.set_exception(std::current_exception());
      }
    }
  }

  AnnotateService& service;
  std::mutex m;
  std::condition_variable cv;
  std::deque<Job> queue;
  bool stop = false;
  std::thread thread;
};

AnnotateService::AnnotateService(const fs::path& session_dir) : session_dir_(session_dir) {
  if (!fs::exists(session_dir / kSessionFile)) {
    spdlog::warn("no session at {}", session_dir.string());
    return;
  }
  const SessionInfo info = SessionInfo::load(session_dir);
  if (!info.images_dir.empty()) images_dir_ = session_dir / info.images_dir;
  store_ = std::make_unique<SessionStore>(SessionStore::open(session_dir));
  writer_ = std::make_unique<Writer>(*this);
}

AnnotateService::~AnnotateService() = default;

std::string AnnotateService::cluster_view(const ClusterCandidate& c) const {
  std::vector<MaskRecord> members;
  for (std::uint64_t id : c.member_ids) members.push_back(*store_->find_mask(id));
  sort_canonical(members);
  json list = json::array();
  for (const auto& m : members) {
    const BBox& b = m.mask.bbox();
    list.push_back({{"id", m.id},
                    {"tile", {m.tile.row, m.tile.col}},
                    {"bbox", {b.x0, b.y0, b.w, b.h}},
                    {"area", m.area_px},
                    {"thumbnail", "/api/thumbnail/" + std::to_string(m.id)}});
  }
  json suggested = nullptr;
  if (store_->schema().valid(c.dominant_class)) {
    suggested = {{"id", c.dominant_class}, {"name", store_->schema().at(c.dominant_class).name}};
  }
  json decided = nullptr;
  const auto& eff = store_->effective();
  if (auto it = eff.find(c.id); it != eff.end()) {
    decided = {{"verdict", it->second.verdict == Verdict::Labeled ? "labeled" : "rejected"},
               {"excluded_member_ids", it->second.excluded_member_ids}};
    if (it->second.verdict == Verdict::Labeled) decided["class_id"] = it->second.class_id;
  }
  return json{{"cluster_id", c.id},
              {"stage", to_string(c.stage)},
              {"suggested_class", suggested},
              {"purity", c.purity},
              {"members", list},
              {"decided", decided}}
      .dump();
}

std::string AnnotateService::progress_json() const {
  const Progress p = store_->progress();
  json stages = json::object();
  for (const auto& [stage, counts] : p.per_stage) {
    stages[std::string(to_string(stage))] = {{"total", counts.first}, {"decided", counts.second}};
  }
  json classes = json::object();
  for (const auto& [cls, n] : p.masks_per_class) classes[store_->schema().at(cls).name] = n;
  return json{{"decided", p.decided},
              {"remaining", p.remaining},
              {"masks_labeled", p.masks_labeled},
              {"per_stage", stages},
              {"per_class", classes}}
      .dump();
}

HttpResponse AnnotateService::next_cluster(std::optional<std::uint64_t> after) const {
  if (!store_) return no_session();
  std::shared_lock lock(mutex_);
  const auto& eff = store_->effective();
  std::uint64_t remaining = 0;
  const ClusterCandidate* next = nullptr;
  for (const auto& c : store_->clusters()) {
    if (eff.contains(c.id)) continue;
    ++remaining;
    if (!next && (!after || c.id > *after)) next = &c;
  }
  json out = {{"cluster", next ? json::parse(cluster_view(*next)) : json(nullptr)}, {"remaining", remaining}};
  return json_response(out);
}

HttpResponse AnnotateService::cluster(std::uint64_t id) const {
  if (!store_) return no_session();
  std::shared_lock lock(mutex_);
  const ClusterCandidate* c = store_->find_cluster(id);
  if (!c) return error_response(404, "unknown_cluster", "cluster " + std::to_string(id) + " does not exist");
  return {200, "application/json", cluster_view(*c)};
}

HttpResponse AnnotateService::post_decision(std::uint64_t cluster_id, const std::string& body) {
  if (!store_) return no_session();
  {
    std::shared_lock lock(mutex_);
    if (!store_->find_cluster(cluster_id)) {
      return error_response(404, "unknown_cluster", "cluster " + std::to_string(cluster_id) + " does not exist");
    }
  }
  ClusterDecision d;
  d.cluster_id = cluster_id;
  try {
    const json j = json::parse(body);
    const std::string verdict = j.at("verdict").get<std::string>();
    if (verdict == "labeled") {
      d.verdict = Verdict::Labeled;
      const json& cls = j.at("class");
      if (cls.is_string()) {
        const auto id = store_->schema().find(cls.get<std::string>());
        if (!id) return error_response(422, "invalid_class", "unknown class '" + cls.get<std::string>() + "'");
        d.class_id = *id;
      } else {
        const auto v = cls.get<std::int64_t>();
        if (v < 0 || v > 255) return error_response(422, "invalid_class", "class id out of range");
        d.class_id = static_cast<ClassId>(v);
      }
    } else if (verdict == "rejected") {
      d.verdict = Verdict::Rejected;
    } else {
      return error_response(422, "invalid_payload", "verdict must be 'labeled' or 'rejected'");
    }
    if (j.contains("excluded")) d.excluded_member_ids = j.at("excluded").get<std::vector<std::uint64_t>>();
    d.annotator = j.value("annotator", std::string("ui"));
    d.timestamp = j.value("timestamp", static_cast<std::int64_t>(std::time(nullptr)));
  } catch (const json::exception& e) {
    return error_response(422, "invalid_payload", e.what());
  }
  try {
    writer_->submit(d).get();
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::UnknownCluster ? 404
                       : (e.code() == ErrorCode::NotAMember || e.code() == ErrorCode::InvalidClass) ? 422
                                                                                                     : 500;
    return error_response(status, api_code(e.code()), e.what());
  }
  std::shared_lock lock(mutex_);
  return {200, "application/json", progress_json()};
}

const RgbImage& AnnotateService::tile_image(TilePos t) const {
  auto it = tiles_.find(t);
  if (it != tiles_.end()) return it->second;
  return tiles_.emplace(t, read_rgb_png(images_dir_ / tile_image_name(t.row, t.col))).first->second;
}

std::vector<std::uint8_t> AnnotateService::render_thumbnail(std::uint64_t mask_id) const {
  if (!store_) fail(ErrorCode::Io, "no session");
  const MaskRecord* m = store_->find_mask(mask_id);
  if (!m) fail(ErrorCode::UnknownMask, "mask " + std::to_string(mask_id) + " does not exist");
  std::lock_guard lock(cache_mutex_);
  if (auto it = thumbs_.find(mask_id); it != thumbs_.end()) return it->second;

  const TileGrid& grid = store_->grid();
  const BBox tile = grid.tile_box(m->tile);
  const SpanSet mask = global_frame(*m, grid).spans();
  const BBox b = mask.bbox();
  const auto pw = static_cast<std::int64_t>(std::lround(b.w * 0.25));
  const auto ph = static_cast<std::int64_t>(std::lround(b.h * 0.25));
  // Context is clamped to the anchor tile, widened to keep the whole mask.
  const std::int64_t lo_x = std::min<std::int64_t>(tile.x0, b.x0), hi_x = std::max(tile.x1(), b.x1());
  const std::int64_t lo_y = std::min<std::int64_t>(tile.y0, b.y0), hi_y = std::max(tile.y1(), b.y1());
  const std::int64_t x0 = std::max(lo_x, b.x0 - pw), x1 = std::min(hi_x, b.x1() + pw);
  const std::int64_t y0 = std::max(lo_y, b.y0 - ph), y1 = std::min(hi_y, b.y1() + ph);

  if (images_dir_.empty()) fail(ErrorCode::Io, "session has no imagery");
  // Cache key: mask geometry plus the digest of every source tile.
  std::string key = mask_record_to_json(*m);
  const TilePos t0 = grid.tile_at(static_cast<double>(x0), static_cast<double>(y0));
  const TilePos t1 = grid.tile_at(static_cast<double>(x1 - 1), static_cast<double>(y1 - 1));
  for (std::int32_t r = t0.row; r <= t1.row; ++r) {
    for (std::int32_t c = t0.col; c <= t1.col; ++c) {
      const fs::path p = images_dir_ / tile_image_name(r, c);
      if (!fs::exists(p)) fail(ErrorCode::Io, "imagery missing: " + p.string());
      key += sha256_file(p);
    }
  }
  const fs::path cache_file = session_dir_ / kThumbDir / (sha256_hex(key) + ".png");
  if (fs::exists(cache_file)) return thumbs_[mask_id] = read_bytes(cache_file);

  RgbImage out(static_cast<int>(x1 - x0), static_cast<int>(y1 - y0));
  for (std::int64_t y = y0; y < y1; ++y) {
    for (std::int64_t x = x0; x < x1; ++x) {
      const TilePos t = grid.tile_at(static_cast<double>(x), static_cast<double>(y));
      const BBox tb = grid.tile_box(t);
      const auto px = tile_image(t).pixel(static_cast<int>(x - tb.x0), static_cast<int>(y - tb.y0));
      out.set(static_cast<int>(x - x0), static_cast<int>(y - y0), {px[0], px[1], px[2]});
    }
  }
  const SpanSet outline = contour(mask);
  for (const Span& s : outline.spans()) {
    if (s.y < y0 || s.y >= y1) continue;
    for (std::int32_t x = s.x0; x < s.x1; ++x) {
      if (x >= x0 && x < x1) out.set(static_cast<int>(x - x0), static_cast<int>(s.y - y0), kContour);
    }
  }
  auto bytes = encode_png(out);
  try {
    write_bytes(cache_file, bytes);
  } catch (const Error& e) {
    spdlog::warn("thumbnail cache write failed: {}", e.what());
  }
  return thumbs_[mask_id] = std::move(bytes);
}

HttpResponse AnnotateService::thumbnail(std::uint64_t mask_id) const {
  if (!store_) return no_session();
  try {
    const auto bytes = render_thumbnail(mask_id);
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownMask) return error_response(404, "unknown_mask", e.what());
    return error_response(503, "imagery_missing", e.what());
  }
}

HttpResponse AnnotateService::progress() const {
  if (!store_) return no_session();
  std::shared_lock lock(mutex_);
  return {200, "application/json", progress_json()};
}

HttpResponse AnnotateService::export_sparse_png() const {
  if (!store_) return no_session();
  std::shared_lock lock(mutex_);
  const auto bytes = encode_png(export_sparse(*store_));
  return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

HttpResponse AnnotateService::schema() const {
  if (!store_) return no_session();
  json classes = json::array();
  for (const auto& c : store_->schema().classes()) {
    classes.push_back({{"id", c.id}, {"name", c.name}, {"color", {c.color.r, c.color.g, c.color.b}}});
  }
  return json_response({{"name", store_->schema().name()}, {"classes", classes}, {"ignore_id", kIgnoreId}});
}

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>mcae</title></head>"
    "<body><h1>mcae annotate</h1><p>API under <code>/api</code>. Start with "
    "<a href=\"/api/clusters/next\">/api/clusters/next</a>.</p></body></html>";

void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type.c_str());
}

std::optional<std::uint64_t> parse_id(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

ApiServer::ApiServer(AnnotateService& service, std::optional<fs::path> ui_dir)
    : server_(std::make_unique<httplib::Server>()) {
  httplib::Server& server = *server_;
  server.Get("/api/clusters/next", [&service](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::uint64_t> after;
    if (req.has_param("after")) {
      after = parse_id(req.get_param_value("after"));
      if (!after) return reply(res, error_response(422, "invalid_payload", "after must be a cluster id"));
    }
    reply(res, service.next_cluster(after));
  });
  server.Get(R"(/api/clusters/(\d+))", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto id = parse_id(req.matches[1]);
    if (!id) return reply(res, error_response(404, "unknown_cluster", "bad cluster id"));
    reply(res, service.cluster(*id));
  });
  server.Post(R"(/api/clusters/(\d+)/decision)", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto id = parse_id(req.matches[1]);
    if (!id) return reply(res, error_response(404, "unknown_cluster", "bad cluster id"));
    reply(res, service.post_decision(*id, req.body));
  });
  server.Get(R"(/api/thumbnail/(\d+))", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto id = parse_id(req.matches[1]);
    if (!id) return reply(res, error_response(404, "unknown_mask", "bad mask id"));
    reply(res, service.thumbnail(*id));
  });
  server.Get("/api/progress",
             [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.progress()); });
  server.Get("/api/export/sparse.png",
             [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.export_sparse_png()); });
  server.Get("/api/schema", [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.schema()); });

  if (ui_dir && fs::is_directory(*ui_dir)) {
    server.set_mount_point("/", ui_dir->string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
  }
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && req.path.rfind("/api/", 0) == 0) {
      const auto r = error_response(res.status, "not_found", "no route for " + req.path);
      res.set_content(r.body, r.content_type.c_str());
    }
  });
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::run() {
  if (!server_->listen_after_bind()) fail(ErrorCode::Io, "server stopped unexpectedly");
}

void ApiServer::stop() { server_->stop(); }

void serve(AnnotateService& service, const ServeOptions& options) {
  ApiServer server(service, options.ui_dir);
  const int port = server.bind(options.host, options.port);
  spdlog::info("serving on http://{}:{}", options.host, port);
  server.run();
}

}  // namespace mcae
