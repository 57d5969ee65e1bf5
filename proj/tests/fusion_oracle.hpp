#pragma once

#include <random>
#include <string>
#include <vector>

#include "mcae/fusion.hpp"
#include "test_support.hpp"

namespace mcae::testing {

struct FusionCase {
  std::vector<MaskRecord> fine, coarse;
};

/// Random two-scale case in a 160 x 160 mosaic: coarse blobs, fine blobs that
/// are nested in, straddle, or avoid them.
inline FusionCase random_fusion_case(std::mt19937_64& rng) {
  FusionCase fc;
  const int n_coarse = 1 + static_cast<int>(rng() % 5);
  std::vector<PixelSet> coarse_px;
  for (int i = 0; i < n_coarse; ++i) {
    coarse_px.push_back(random_blob(rng, 160, 70, 2));
    fc.coarse.push_back(MaskRecord::make(i + 1, {0, 0}, Scale::Coarse, mask_from_pixels(coarse_px.back())));
  }
  const int n_fine = static_cast<int>(rng() % 12);
  for (int i = 0; i < n_fine; ++i) {
    PixelSet px;
    const auto kind = rng() % 3;
    if (kind == 0) {
      // nested: a sub-rectangle of some coarse pixel's neighbourhood, clipped to it
      const PixelSet& host = coarse_px[rng() % coarse_px.size()];
      auto it = host.begin();
      std::advance(it, static_cast<long>(rng() % host.size()));
      const PixelSet box = shifted(random_blob(rng, 20, 12, 1), it->first - 6, it->second - 6);
      px = set_intersection(box, host);
    } else {
      px = random_blob(rng, 160, 30, 2);
    }
    if (px.empty()) continue;
    fc.fine.push_back(MaskRecord::make(fc.fine.size() + 1, {0, 0}, Scale::Fine, mask_from_pixels(px)));
  }
  return fc;
}

/// Checks fusion output against pixel-set definitions; returns "" on success.
inline std::string check_fusion(const FusionCase& fc, const FusionResult& res, std::uint32_t min_fragment) {
  PixelSet fine_union, all_in;
  std::vector<PixelSet> fine_sets;
  for (const auto& r : fc.fine) {
    fine_sets.push_back(oracle_pixels(r.mask));
    fine_union = set_union(fine_union, fine_sets.back());
  }
  all_in = fine_union;
  for (const auto& r : fc.coarse) all_in = set_union(all_in, oracle_pixels(r.mask));

  PixelSet covered;
  std::size_t total = 0;
  for (std::size_t i = 0; i < res.fused.size(); ++i) {
    const auto& r = res.fused[i];
    if (r.id != i + 1) return "ids are not 1..n";
    if (r.scale != Scale::Fused) return "output not tagged fused";
    const PixelSet px = oracle_pixels(r.mask);
    if (px.size() != r.area_px) return "area_px mismatch";
    total += px.size();
    covered = set_union(covered, px);
    // finer-wins: a fine-derived piece lies inside one fine mask, a coarse
    // residual avoids every fine pixel
    const bool in_fine = std::any_of(fine_sets.begin(), fine_sets.end(), [&](const PixelSet& f) {
      return set_difference(px, f).empty();
    });
    if (!in_fine && !set_intersection(px, fine_union).empty()) return "mask mixes fine and coarse pixels";
  }
  if (covered.size() != total) return "outputs overlap";
  for (const auto& d : res.dropped) {
    const PixelSet px = oracle_pixels(d);
    if (px.size() >= min_fragment) return "dropped a fragment that is not small";
    total += px.size();
    covered = set_union(covered, px);
  }
  if (covered.size() != total) return "dropped fragments overlap output";
  if (covered != all_in) return "union not conserved";
  return "";
}

}  // namespace mcae::testing
