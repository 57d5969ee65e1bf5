#include "mcae/metrics.hpp"

#include <nlohmann/json.hpp>
#include <numeric>

#include "mcae/error.hpp"
#include "mcae/kernels.hpp"

namespace mcae {

ConfusionMatrix::ConfusionMatrix(std::uint32_t classes, std::vector<std::uint64_t> counts)
    : k_(classes), counts_(std::move(counts)) {
  if (counts_.size() != std::size_t{k_} * k_) fail(ErrorCode::DimMismatch, "confusion matrix needs K*K counts");
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::fp(std::uint32_t i) const {
  std::uint64_t col = 0;
  for (std::uint32_t r = 0; r < k_; ++r) col += at(r, i);
  return col - tp(i);
}

std::uint64_t ConfusionMatrix::fn(std::uint32_t i) const {
  std::uint64_t row = 0;
  for (std::uint32_t c = 0; c < k_; ++c) row += at(i, c);
  return row - tp(i);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) fail(ErrorCode::DimMismatch, "confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(const LabelRaster& gt, const LabelRaster& pred, const ClassSchema& schema) {
  if (gt.width != pred.width || gt.height != pred.height) {
    fail(ErrorCode::DimMismatch, "ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height) +
                                     " vs prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height));
  }
  const auto k = static_cast<std::uint32_t>(schema.size());
  for (ClassId v : gt.data) {
    if (v != kIgnoreId && v >= k) fail(ErrorCode::InvalidClass, "ground truth value " + std::to_string(v) + " outside schema");
  }
  return ConfusionMatrix(k, kernels::omp::confusion_tally(gt.data, pred.data, k));
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

double mean_of(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) fail(ErrorCode::InvalidArgument, "cannot compute metrics of an empty confusion matrix");
  MetricsReport r;
  std::uint64_t trace = 0;
  for (std::uint32_t i = 0; i < cm.classes(); ++i) {
    const std::uint64_t tp = cm.tp(i), fp = cm.fp(i), fn = cm.fn(i);
    trace += tp;
    r.iou.push_back(ratio(tp, tp + fp + fn));
    r.f1.push_back(ratio(2 * tp, 2 * tp + fp + fn));
    r.ua.push_back(ratio(tp, tp + fp));
  }
  r.oa = static_cast<double>(trace) / static_cast<double>(total);
  r.m_iou = mean_of(r.iou);
  r.m_f1 = mean_of(r.f1);
  return r;
}

std::vector<double> area_report(const LabelRaster& raster, const ClassSchema& schema) {
  if (!(raster.pixel_size_m > 0)) fail(ErrorCode::InvalidArgument, "pixel_size_m must be positive");
  std::vector<std::uint64_t> counts(schema.size(), 0);
  for (ClassId v : raster.data) {
    if (v < counts.size()) ++counts[v];
  }
  const double px_area_ha = raster.pixel_size_m * raster.pixel_size_m / 10000.0;
  std::vector<double> out;
  out.reserve(counts.size());
  for (std::uint64_t c : counts) out.push_back(static_cast<double>(c) * px_area_ha);
  return out;
}

std::string metrics_report_json(const MetricsReport& report, const ConfusionMatrix& cm, const ClassSchema& schema) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per_class = json::array();
  for (std::uint32_t i = 0; i < cm.classes(); ++i) {
    per_class.push_back({{"id", i},
                         {"name", schema.at(static_cast<ClassId>(i)).name},
                         {"iou", opt(report.iou[i])},
                         {"f1", opt(report.f1[i])},
                         {"ua", opt(report.ua[i])}});
  }
  json matrix = json::array();
  for (std::uint32_t r = 0; r < cm.classes(); ++r) {
    json row = json::array();
    for (std::uint32_t c = 0; c < cm.classes(); ++c) row.push_back(cm.at(r, c));
    matrix.push_back(row);
  }
  json j = {{"schema", schema.name()}, {"oa", report.oa},       {"m_iou", report.m_iou},
            {"m_f1", report.m_f1},     {"per_class", per_class}, {"confusion", matrix}};
  return j.dump(2);
}

}  // namespace mcae
