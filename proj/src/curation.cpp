#include "mcae/curation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <regex>
#include <string>

#include "mcae/error.hpp"
#include "mcae/kernels.hpp"

namespace mcae {

using nlohmann::json;

namespace {

std::vector<float> normalized(std::vector<double> acc) {
  double n = 0.0;
  for (double x : acc) n += x * x;
  n = std::sqrt(n);
  std::vector<float> out(acc.size(), 0.0f);
  if (n > 0) {
    for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / n);
  }
  return out;
}

}  // namespace

std::vector<float> pool_normalize(const std::vector<std::span<const float>>& vectors) {
  if (vectors.empty()) return {};
  std::vector<double> acc(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != acc.size()) fail(ErrorCode::DimMismatch, "pooled vectors differ in dim");
    for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
  }
  for (double& x : acc) x /= static_cast<double>(vectors.size());
  return normalized(std::move(acc));
}

std::vector<float> tile_embedding(const FeatureMap& map) {
  std::vector<double> acc(map.dim, 0.0);
  const std::size_t pixels = static_cast<std::size_t>(map.width) * map.height;
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::uint32_t k = 0; k < map.dim; ++k) acc[k] += map.data[p * map.dim + k];
  }
  if (pixels > 0) {
    for (double& x : acc) x /= static_cast<double>(pixels);
  }
  return normalized(std::move(acc));
}

std::vector<TileEmbedding> tile_embeddings(const FeatureTable& features, const std::vector<MaskRecord>& masks,
                                           const TileGrid& grid) {
  const std::size_t dim = std::max<std::size_t>(features.dim(), 1);
  std::vector<float> rows;
  std::vector<std::uint32_t> group;
  for (const auto& m : masks) {
    const auto* f = features.find(m.id);
    if (!f || !grid.contains(m.tile)) continue;
    rows.insert(rows.end(), f->begin(), f->end());
    group.push_back(static_cast<std::uint32_t>(grid.index(m.tile)));
  }
  std::vector<double> sums;
  std::vector<std::uint64_t> counts;
  kernels::omp::group_sums({rows.data(), group.size(), dim}, group, grid.tile_count(), sums, counts);

  std::vector<double> global(dim, 0.0);
  for (const auto& [id, vec] : features.entries()) {
    for (std::size_t k = 0; k < dim; ++k) global[k] += vec[k];
  }
  const std::vector<float> global_embedding = normalized(global);

  std::vector<TileEmbedding> out;
  out.reserve(grid.tile_count());
  for (std::size_t t = 0; t < grid.tile_count(); ++t) {
    if (counts[t] == 0) {
      out.push_back({grid.position(t), global_embedding});
      continue;
    }
    std::vector<double> acc(sums.begin() + static_cast<std::ptrdiff_t>(t * dim),
                            sums.begin() + static_cast<std::ptrdiff_t>((t + 1) * dim));
    out.push_back({grid.position(t), normalized(std::move(acc))});
  }
  return out;
}

double partition_ssd(const std::vector<TileEmbedding>& embeddings, const std::vector<std::uint32_t>& region_of,
                     std::size_t regions) {
  if (embeddings.empty()) return 0.0;
  const std::size_t dim = embeddings.front().vector.size();
  std::vector<double> mean(regions * dim, 0.0);
  std::vector<std::size_t> count(regions, 0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    ++count[region_of[i]];
    for (std::size_t k = 0; k < dim; ++k) mean[region_of[i] * dim + k] += embeddings[i].vector[k];
  }
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t k = 0; k < dim; ++k) {
      if (count[r]) mean[r * dim + k] /= static_cast<double>(count[r]);
    }
  }
  double ssd = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = embeddings[i].vector[k] - mean[region_of[i] * dim + k];
      ssd += d * d;
    }
  }
  return ssd;
}

std::size_t default_region_count(const TileGrid& grid) { return (grid.tile_count() + 399) / 400; }

namespace {

struct Edge {
  double weight;
  std::uint32_t u, v;  // u < v
};

struct Stats {
  std::vector<double> sum;
  double sumsq = 0.0;
  double n = 0.0;
  double ssd() const {
    if (n == 0) return 0.0;
    double s2 = 0.0;
    for (double x : sum) s2 += x * x;
    return std::max(0.0, sumsq - s2 / n);
  }
};

}  // namespace

RegionPartition skater_partition(const TileGrid& grid, const std::vector<TileEmbedding>& embeddings,
                                 std::size_t regions) {
  const std::size_t n = grid.tile_count();
  if (embeddings.size() != n) fail(ErrorCode::DimMismatch, "need exactly one embedding per tile");
  if (regions < 1 || regions > n) {
    fail(ErrorCode::InvalidArgument, "region count " + std::to_string(regions) + " outside [1, " + std::to_string(n) + "]");
  }
  const std::size_t dim = embeddings.front().vector.size();
  const auto vec = [&](std::size_t i) { return embeddings[i].vector.data(); };

  std::vector<Edge> edges;
  for (std::int32_t r = 0; r < grid.rows; ++r) {
    for (std::int32_t c = 0; c < grid.cols; ++c) {
      const auto u = static_cast<std::uint32_t>(grid.index({r, c}));
      auto add = [&](std::uint32_t v) {
        double w = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double d = static_cast<double>(vec(u)[k]) - vec(v)[k];
          w += d * d;
        }
        edges.push_back({w, u, v});
      };
      if (c + 1 < grid.cols) add(static_cast<std::uint32_t>(grid.index({r, c + 1})));
      if (r + 1 < grid.rows) add(static_cast<std::uint32_t>(grid.index({r + 1, c})));
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.weight, a.u, a.v) < std::tie(b.weight, b.u, b.v);
  });

  // Kruskal.
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const Edge& e : edges) {
    const std::uint32_t a = find(e.u), b = find(e.v);
    if (a == b) continue;
    parent[std::max(a, b)] = std::min(a, b);
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }

  auto remove_edge = [&](std::uint32_t a, std::uint32_t b) {
    std::erase(adj[a], b);
    std::erase(adj[b], a);
  };

  std::vector<std::uint32_t> region_of(n, 0);
  for (std::size_t cut = 1; cut < regions; ++cut) {
    // Root every tree at its lowest tile and accumulate subtree statistics.
    std::vector<std::int64_t> up(n, -1);
    std::vector<char> seen(n, 0);
    std::vector<Stats> sub(n, Stats{std::vector<double>(dim, 0.0), 0.0, 0.0});
    std::vector<std::uint32_t> root_of(n);
    std::vector<Stats> whole;
    for (std::uint32_t root = 0; root < n; ++root) {
      if (seen[root]) continue;
      std::vector<std::uint32_t> order{root};
      seen[root] = 1;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const std::uint32_t x = order[i];
        root_of[x] = root;
        for (std::uint32_t y : adj[x]) {
          if (seen[y]) continue;
          seen[y] = 1;
          up[y] = x;
          order.push_back(y);
        }
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Stats& s = sub[*it];
        for (std::size_t k = 0; k < dim; ++k) {
          s.sum[k] += vec(*it)[k];
          s.sumsq += static_cast<double>(vec(*it)[k]) * vec(*it)[k];
        }
        s.n += 1;
        if (up[*it] >= 0) {
          Stats& p = sub[static_cast<std::size_t>(up[*it])];
          for (std::size_t k = 0; k < dim; ++k) p.sum[k] += s.sum[k];
          p.sumsq += s.sumsq;
          p.n += s.n;
        }
      }
    }

    double best = -1.0;
    std::uint32_t best_a = 0, best_b = 0;
    for (std::uint32_t child = 0; child < n; ++child) {
      if (up[child] < 0) continue;
      const auto par = static_cast<std::uint32_t>(up[child]);
      const Stats& total = sub[root_of[child]];
      const Stats& a = sub[child];
      Stats b{std::vector<double>(dim), total.sumsq - a.sumsq, total.n - a.n};
      for (std::size_t k = 0; k < dim; ++k) b.sum[k] = total.sum[k] - a.sum[k];
      const double gain = total.ssd() - a.ssd() - b.ssd();
      const std::uint32_t lo = std::min(child, par), hi = std::max(child, par);
      const double tol = 1e-12 * (1.0 + std::abs(best));
      if (gain > best + tol || (std::abs(gain - best) <= tol && std::tie(lo, hi) < std::tie(best_a, best_b))) {
        best = gain;
        best_a = lo;
        best_b = hi;
      }
    }
    remove_edge(best_a, best_b);
  }

  // Label components of the final forest.
  RegionPartition out;
  std::vector<char> seen(n, 0);
  for (std::uint32_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    const auto label = static_cast<std::uint32_t>(out.regions.size());
    std::vector<std::uint32_t> stack{start};
    std::vector<TilePos> tiles;
    seen[start] = 1;
    while (!stack.empty()) {
      const std::uint32_t x = stack.back();
      stack.pop_back();
      region_of[x] = label;
      tiles.push_back(grid.position(x));
      for (std::uint32_t y : adj[x]) {
        if (!seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
      }
    }
    std::sort(tiles.begin(), tiles.end());
    out.regions.push_back(std::move(tiles));
  }
  out.region_of = std::move(region_of);
  out.ssd = partition_ssd(embeddings, out.region_of, out.regions.size());
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t range) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % range;
}

}  // namespace

SampleResult stratified_sample(const RegionPartition& partition, std::size_t n_per_region, std::uint64_t seed,
                               const std::set<TilePos>& exclude) {
  SampleResult out;
  if (n_per_region == 0) return out;
  for (std::size_t r = 0; r < partition.regions.size(); ++r) {
    std::vector<TilePos> avail;
    for (const TilePos& t : partition.regions[r]) {
      if (!exclude.contains(t)) avail.push_back(t);
    }
    std::sort(avail.begin(), avail.end());
    if (avail.size() < n_per_region) out.short_regions.push_back(static_cast<std::uint32_t>(r));
    const std::size_t k = std::min(n_per_region, avail.size());
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(r)));
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + bounded(rng, avail.size() - i);
      std::swap(avail[i], avail[j]);
    }
    out.tiles.insert(out.tiles.end(), avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(out.tiles.begin(), out.tiles.end());
  return out;
}

std::vector<RunLengthMask> masks_for_tile(const std::vector<MaskRecord>& masks, const TileGrid& grid, TilePos tile) {
  const BBox box = grid.tile_box(tile);
  std::vector<RunLengthMask> out;
  for (const auto& m : masks) {
    const SpanSet local = global_frame(m, grid).spans().clipped(box).translated(-box.x0, -box.y0);
    if (!local.empty()) out.push_back(RunLengthMask::from_spans(local));
  }
  return out;
}

LabelRaster draft_annotation(const LabelRaster& prediction, const std::vector<RunLengthMask>& masks) {
  LabelRaster out = prediction;
  const BBox bounds{0, 0, prediction.width, prediction.height};
  std::vector<std::pair<SpanSet, ClassId>> paint;
  paint.reserve(masks.size());
  for (const auto& m : masks) {
    SpanSet s = m.spans().clipped(bounds);
    if (s.empty()) continue;
    std::array<std::uint64_t, 256> counts{};
    for (const Span& sp : s.spans()) {
      for (std::int32_t x = sp.x0; x < sp.x1; ++x) ++counts[prediction.at(x, sp.y)];
    }
    ClassId best = kIgnoreId;
    std::uint64_t best_count = 0;
    for (std::size_t c = 0; c < kIgnoreId; ++c) {
      if (counts[c] > best_count) {
        best_count = counts[c];
        best = static_cast<ClassId>(c);
      }
    }
    paint.emplace_back(std::move(s), best);
  }
  for (const auto& [s, cls] : paint) {
    for (const Span& sp : s.spans()) {
      std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(sp.y) * out.width + sp.x0),
                  sp.length(), cls);
    }
  }
  return out;
}

LabelRaster apply_refinement(const LabelRaster& draft, const std::vector<RefinementEdit>& edits,
                             const ClassSchema& schema) {
  LabelRaster out = draft;
  for (const auto& e : edits) {
    if (!schema.valid(e.class_id)) fail(ErrorCode::InvalidClass, "edit class " + std::to_string(e.class_id) + " not in schema");
    const SpanSet region = std::holds_alternative<BBox>(e.region)
                               ? SpanSet::rect(std::get<BBox>(e.region).x0, std::get<BBox>(e.region).y0,
                                               std::get<BBox>(e.region).w, std::get<BBox>(e.region).h)
                               : std::get<RunLengthMask>(e.region).spans();
    const BBox b = region.bbox();
    if (!region.empty() && (b.x0 < 0 || b.y0 < 0 || b.x1() > out.width || b.y1() > out.height)) {
      fail(ErrorCode::OutOfBounds, "edit region outside the tile");
    }
    for (const Span& sp : region.spans()) {
      std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(sp.y) * out.width + sp.x0),
                  sp.length(), e.class_id);
    }
  }
  return out;
}

std::vector<RefinementEdit> read_edits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open edits " + path.string());
  try {
    const json j = json::parse(in);
    std::vector<RefinementEdit> out;
    for (const auto& e : j.at("edits")) {
      RefinementEdit edit;
      edit.class_id = e.at("class").get<ClassId>();
      if (e.contains("rect")) {
        const auto& r = e.at("rect");
        edit.region = BBox{r.at(0).get<std::int32_t>(), r.at(1).get<std::int32_t>(), r.at(2).get<std::int32_t>(),
                           r.at(3).get<std::int32_t>()};
      } else {
        const auto& b = e.at("bbox");
        edit.region = RunLengthMask({b.at(0).get<std::int32_t>(), b.at(1).get<std::int32_t>(),
                                     b.at(2).get<std::int32_t>(), b.at(3).get<std::int32_t>()},
                                    e.at("rle").get<std::vector<std::uint32_t>>());
      }
      out.push_back(std::move(edit));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "bad edits file " + path.string() + ": " + e.what());
  }
}

void RefinementRound::mark_refined(TilePos tile) {
  auto it = status.find(tile);
  if (it == status.end()) {
    fail(ErrorCode::InvalidArgument, "tile (" + std::to_string(tile.row) + "," + std::to_string(tile.col) +
                                         ") was not sampled in round " + std::to_string(round));
  }
  it->second = TileStatus::Refined;
}

void RefinementRound::save(const std::filesystem::path& path) const {
  json tiles = json::array();
  for (const auto& t : sampled_tiles) {
    const auto it = status.find(t);
    const bool refined = it != status.end() && it->second == TileStatus::Refined;
    tiles.push_back({{"tile", {t.row, t.col}}, {"status", refined ? "refined" : "drafted"}});
  }
  json j = {{"round", round}, {"seed", seed}, {"n_per_region", n_per_region}, {"tiles", tiles}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "cannot write round manifest " + path.string());
}

RefinementRound RefinementRound::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open round manifest " + path.string());
  try {
    const json j = json::parse(in);
    RefinementRound r;
    r.round = j.at("round").get<std::uint32_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_per_region = j.at("n_per_region").get<std::size_t>();
    for (const auto& t : j.at("tiles")) {
      const TilePos pos{t.at("tile").at(0).get<std::int32_t>(), t.at("tile").at(1).get<std::int32_t>()};
      r.sampled_tiles.push_back(pos);
      r.status[pos] = t.at("status").get<std::string>() == "refined" ? TileStatus::Refined : TileStatus::Drafted;
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "bad round manifest " + path.string() + ": " + e.what());
  }
}

std::filesystem::path round_manifest_path(const std::filesystem::path& curation_dir, std::uint32_t round) {
  return curation_dir / ("round_" + std::to_string(round) + ".json");
}

std::set<TilePos> previously_sampled(const std::filesystem::path& curation_dir, std::uint32_t before_round) {
  std::set<TilePos> out;
  if (!std::filesystem::exists(curation_dir)) return out;
  const std::regex pattern(R"(round_(\d+)\.json)");
  for (const auto& entry : std::filesystem::directory_iterator(curation_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    if (std::stoul(m[1].str()) >= before_round) continue;
    for (const auto& t : RefinementRound::load(entry.path()).sampled_tiles) out.insert(t);
  }
  return out;
}

void save_partition(const std::filesystem::path& path, const RegionPartition& partition, const TileGrid& grid) {
  json regions = json::array();
  for (const auto& r : partition.regions) {
    json tiles = json::array();
    for (const auto& t : r) tiles.push_back({t.row, t.col});
    regions.push_back(tiles);
  }
  json j = {{"P", partition.size()},
            {"grid", {{"tile_size", grid.tile_size}, {"rows", grid.rows}, {"cols", grid.cols}}},
            {"ssd", partition.ssd},
            {"regions", regions}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "cannot write partition " + path.string());
}

RegionPartition load_partition(const std::filesystem::path& path, TileGrid* grid) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open partition " + path.string());
  try {
    const json j = json::parse(in);
    const auto& g = j.at("grid");
    const TileGrid tg(g.at("tile_size").get<std::int32_t>(), g.at("rows").get<std::int32_t>(),
                      g.at("cols").get<std::int32_t>());
    if (grid) *grid = tg;
    RegionPartition p;
    p.region_of.assign(tg.tile_count(), 0);
    for (const auto& r : j.at("regions")) {
      std::vector<TilePos> tiles;
      for (const auto& t : r) {
        const TilePos pos{t.at(0).get<std::int32_t>(), t.at(1).get<std::int32_t>()};
        p.region_of[tg.index(pos)] = static_cast<std::uint32_t>(p.regions.size());
        tiles.push_back(pos);
      }
      p.regions.push_back(std::move(tiles));
    }
    p.ssd = j.at("ssd").get<double>();
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "bad partition file " + path.string() + ": " + e.what());
  }
}

}  // namespace mcae
