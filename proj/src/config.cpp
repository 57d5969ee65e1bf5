#include "mcae/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mcae/error.hpp"

namespace mcae {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end) fail(ErrorCode::Config, "bad value for " + key + ": '" + value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  double out = 0.0;
  in >> out;
  if (!in || !in.eof() || !std::isfinite(out)) fail(ErrorCode::Config, "bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(ErrorCode::Config, "bad boolean for " + key + ": '" + value + "'");
}

std::string fmt_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

ClassSchema schema_by_name(const std::string& name) {
  if (name == "oem8") return ClassSchema::oem8();
  if (name == "oem9") return ClassSchema::oem9();
  fail(ErrorCode::Config, "unknown schema '" + name + "' (expected oem8 or oem9)");
}

void EngineConfig::set(const std::string& key, const std::string& value) {
  using std::int32_t;
  using std::uint32_t;
  using std::uint64_t;
  if (key == "schema") schema = value;
  else if (key == "tile_size") tile_size = parse_number<int32_t>(key, value);
  else if (key == "overlap_ratio") overlap_ratio = parse_real(key, value);
  else if (key == "grid_rows") grid_rows = parse_number<int32_t>(key, value);
  else if (key == "grid_cols") grid_cols = parse_number<int32_t>(key, value);
  else if (key == "pixel_size_m") pixel_size_m = parse_real(key, value);
  else if (key == "seed") seed = parse_number<uint64_t>(key, value);
  else if (key == "auto_label") auto_label = parse_bool(key, value);
  else if (key == "consistency.iou_match") consistency.iou_match = parse_real(key, value);
  else if (key == "consistency.iou_conflict_floor") consistency.iou_conflict_floor = parse_real(key, value);
  else if (key == "fusion.min_fragment_px") fusion.min_fragment_px = parse_number<uint32_t>(key, value);
  else if (key == "cluster.eps") cluster.eps = parse_real(key, value);
  else if (key == "cluster.min_pts") cluster.min_pts = parse_number<uint32_t>(key, value);
  else if (key == "cluster.purity_threshold") cluster.purity_threshold = parse_real(key, value);
  else if (key == "cluster.small_window") cluster.small_window = parse_number<int32_t>(key, value);
  else if (key == "cluster.large_window") cluster.large_window = parse_number<int32_t>(key, value);
  else if (key == "curation.regions") curation.regions = parse_number<std::size_t>(key, value);
  else if (key == "curation.n_per_region") curation.n_per_region = parse_number<std::size_t>(key, value);
  else if (key == "curation.seed") curation.seed = parse_number<uint64_t>(key, value);
  else if (key == "paths.scene") paths.scene = value;
  else if (key == "paths.run") paths.run = value;
  else if (key == "paths.features") {
    if (value.empty()) paths.features.reset();
    else paths.features = value;
  } else {
    fail(ErrorCode::Config, "unknown config key '" + key + "'");
  }
}

void EngineConfig::validate() const {
  try {
    schema_by_name(schema);
    if (tile_size < 4 || tile_size % 4 != 0) fail(ErrorCode::Config, "tile_size must be a positive multiple of 4");
    if (overlap_ratio != 0.5) fail(ErrorCode::Config, "overlap_ratio must be 0.5 (fine grid stride is tile_size/2)");
    if (grid_rows < 1 || grid_cols < 1) fail(ErrorCode::Config, "grid dims must be positive");
    if (!(pixel_size_m > 0)) fail(ErrorCode::Config, "pixel_size_m must be positive");
    consistency.validate();
    fusion.validate();
    cluster.validate();
    if (curation.regions > annotation_grid().tile_count()) fail(ErrorCode::Config, "curation.regions exceeds tile count");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    fail(ErrorCode::Config, e.what());
  }
}

ClassSchema EngineConfig::class_schema() const { return schema_by_name(schema); }

TileGrid EngineConfig::fine_grid() const { return {tile_size, 2 * grid_rows - 1, 2 * grid_cols - 1, overlap_ratio}; }

std::vector<std::pair<std::string, std::string>> EngineConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"schema", schema},
      {"tile_size", std::to_string(tile_size)},
      {"overlap_ratio", fmt_real(overlap_ratio)},
      {"grid_rows", std::to_string(grid_rows)},
      {"grid_cols", std::to_string(grid_cols)},
      {"pixel_size_m", fmt_real(pixel_size_m)},
      {"seed", std::to_string(seed)},
      {"auto_label", auto_label ? "true" : "false"},
      {"consistency.iou_match", fmt_real(consistency.iou_match)},
      {"consistency.iou_conflict_floor", fmt_real(consistency.iou_conflict_floor)},
      {"fusion.min_fragment_px", std::to_string(fusion.min_fragment_px)},
      {"cluster.eps", fmt_real(cluster.eps)},
      {"cluster.min_pts", std::to_string(cluster.min_pts)},
      {"cluster.purity_threshold", fmt_real(cluster.purity_threshold)},
      {"cluster.small_window", std::to_string(cluster.small_window)},
      {"cluster.large_window", std::to_string(cluster.large_window)},
      {"curation.regions", std::to_string(curation.regions)},
      {"curation.n_per_region", std::to_string(curation.n_per_region)},
      {"curation.seed", std::to_string(curation.seed)},
      {"paths.scene", paths.scene.string()},
      {"paths.run", paths.run.string()},
  };
  if (paths.features) out.emplace_back("paths.features", paths.features->string());
  return out;
}

void EngineConfig::save(const std::filesystem::path& path) const {
  boost::property_tree::ptree tree;
  for (const auto& [k, v] : entries()) tree.put(boost::property_tree::ptree::path_type(k, '.'), v);
  try {
    boost::property_tree::write_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::Io, e.what());
  }
}

EngineConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::Config, e.what());
  }
  EngineConfig cfg;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      cfg.set(key, node.data());
      continue;
    }
    for (const auto& [sub, leaf] : node) cfg.set(key + "." + sub, leaf.data());
  }
  return cfg;
}

}  // namespace mcae
