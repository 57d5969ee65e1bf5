#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcae/raster.hpp"
#include "mcae/schema.hpp"

namespace mcae {

/// K x K pixel tally; rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::uint32_t classes = 0) : k_(classes), counts_(std::size_t{classes} * classes, 0) {}
  ConfusionMatrix(std::uint32_t classes, std::vector<std::uint64_t> counts);

  std::uint32_t classes() const noexcept { return k_; }
  std::uint64_t at(std::uint32_t truth, std::uint32_t pred) const { return counts_[std::size_t{truth} * k_ + pred]; }
  std::uint64_t& at(std::uint32_t truth, std::uint32_t pred) { return counts_[std::size_t{truth} * k_ + pred]; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t total() const;

  std::uint64_t tp(std::uint32_t i) const { return at(i, i); }
  std::uint64_t fp(std::uint32_t i) const;
  std::uint64_t fn(std::uint32_t i) const;
  std::uint64_t tn(std::uint32_t i) const { return total() - tp(i) - fp(i) - fn(i); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::uint32_t k_;
  std::vector<std::uint64_t> counts_;
};

/// Tallies pixels whose ground truth is not ignore. Throws DimMismatch.
ConfusionMatrix confusion(const LabelRaster& gt, const LabelRaster& pred, const ClassSchema& schema);

struct MetricsReport {
  double oa = 0.0;
  std::vector<std::optional<double>> iou, f1, ua;  ///< nullopt where 0/0
  double m_iou = 0.0;
  double m_f1 = 0.0;
};

/// OA = trace/total; per class IoU = TP/(TP+FP+FN), F1 = 2TP/(2TP+FP+FN),
/// UA = TP/(TP+FP). Means skip undefined classes.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Per-class area in hectares: count * pixel_size^2 / 1e4, indexed by class.
std::vector<double> area_report(const LabelRaster& raster, const ClassSchema& schema);

std::string metrics_report_json(const MetricsReport& report, const ConfusionMatrix& cm, const ClassSchema& schema);

}  // namespace mcae
