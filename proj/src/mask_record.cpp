#include "mcae/mask_record.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <nlohmann/json.hpp>
#include <string>
#include <tuple>

#include "mcae/error.hpp"

namespace mcae {

using nlohmann::json;

std::string_view to_string(Scale s) {
  switch (s) {
    case Scale::Fine: return "fine";
    case Scale::Coarse: return "coarse";
    case Scale::Fused: return "fused";
  }
  return "?";
}

Scale parse_scale(std::string_view s) {
  if (s == "fine") return Scale::Fine;
  if (s == "coarse") return Scale::Coarse;
  if (s == "fused") return Scale::Fused;
  fail(ErrorCode::Parse, "unknown mask scale '" + std::string(s) + "'");
}

RunLengthMask global_frame(const MaskRecord& record, const TileGrid& grid) {
  const BBox tile = grid.tile_box(record.tile);
  return record.mask.translated(tile.x0, tile.y0);
}

MaskRecord anchor_to_grid(std::uint64_t id, Scale scale, const RunLengthMask& global_mask, const TileGrid& grid) {
  const auto [cx, cy] = global_mask.spans().centroid();
  const TilePos tile = grid.tile_at(cx, cy);
  const BBox box = grid.tile_box(tile);
  return MaskRecord::make(id, tile, scale, global_mask.translated(-box.x0, -box.y0));
}

void sort_canonical(std::vector<MaskRecord>& records) {
  std::sort(records.begin(), records.end(), [](const MaskRecord& a, const MaskRecord& b) {
    return std::tie(a.tile.row, a.tile.col, a.mask.bbox().y0, a.mask.bbox().x0, a.id) <
           std::tie(b.tile.row, b.tile.col, b.mask.bbox().y0, b.mask.bbox().x0, b.id);
  });
}

std::string mask_record_to_json(const MaskRecord& r) {
  const BBox& b = r.mask.bbox();
  json j = {{"id", r.id},
            {"tile", {r.tile.row, r.tile.col}},
            {"scale", to_string(r.scale)},
            {"bbox", {b.x0, b.y0, b.w, b.h}},
            {"rle", r.mask.runs()}};
  return j.dump();
}

MaskRecord mask_record_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
    const auto tile = j.at("tile");
    const auto bbox = j.at("bbox");
    if (tile.size() != 2 || bbox.size() != 4) fail(ErrorCode::Parse, "tile needs 2 and bbox 4 entries");
    RunLengthMask mask({bbox[0].get<std::int32_t>(), bbox[1].get<std::int32_t>(), bbox[2].get<std::int32_t>(),
                        bbox[3].get<std::int32_t>()},
                       j.at("rle").get<std::vector<std::uint32_t>>());
    return MaskRecord::make(j.at("id").get<std::uint64_t>(), {tile[0].get<std::int32_t>(), tile[1].get<std::int32_t>()},
                            parse_scale(j.at("scale").get<std::string>()), std::move(mask));
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad mask record: ") + e.what());
  }
}

std::vector<MaskRecord> read_mask_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open mask set " + path.string());
  std::vector<MaskRecord> records;
  std::set<std::uint64_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(mask_record_from_json(line));
      if (!ids.insert(records.back().id).second) {
        fail(ErrorCode::DuplicateId, "duplicate mask id " + std::to_string(records.back().id));
      }
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void write_mask_set(const std::filesystem::path& path, const std::vector<MaskRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write mask set " + path.string());
  for (const auto& r : records) out << mask_record_to_json(r) << '\n';
}

}  // namespace mcae
