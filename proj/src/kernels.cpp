#include "mcae/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <string>

#include "mcae/error.hpp"

namespace mcae::kernels {

double cosine_distance(const float* a, const float* b, std::size_t dim) {
  double dot = 0.0;
  for (std::size_t k = 0; k < dim; ++k) dot += static_cast<double>(a[k]) * b[k];
  return 1.0 - dot;
}

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

void check_sizes(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred) {
  if (truth.size() != pred.size()) fail(ErrorCode::DimMismatch, "truth and prediction sizes differ");
}

[[noreturn]] void bad_prediction(std::uint8_t v) {
  fail(ErrorCode::InvalidClass, "prediction value " + std::to_string(v) + " outside class range");
}

}  // namespace

namespace serial {

std::vector<std::uint64_t> confusion_tally(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred,
                                           std::size_t classes) {
  check_sizes(truth, pred);
  std::vector<std::uint64_t> counts(classes * classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes) continue;
    if (pred[i] >= classes) bad_prediction(pred[i]);
    ++counts[truth[i] * classes + pred[i]];
  }
  return counts;
}

NeighborLists eps_neighbors(MatrixView points, double eps) {
  NeighborLists out(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    for (std::size_t j = 0; j < points.rows; ++j) {
      if (cosine_distance(points.row(i), points.row(j), points.dim) <= eps) {
        out[i].push_back(static_cast<std::uint32_t>(j));
      }
    }
  }
  return out;
}

void group_sums(MatrixView points, std::span<const std::uint32_t> group, std::size_t groups,
                std::vector<double>& sums, std::vector<std::uint64_t>& counts) {
  sums.assign(groups * points.dim, 0.0);
  counts.assign(groups, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const std::uint32_t g = group[i];
    ++counts[g];
    for (std::size_t k = 0; k < points.dim; ++k) sums[g * points.dim + k] += points.row(i)[k];
  }
}

}  // namespace serial

namespace omp {

std::vector<std::uint64_t> confusion_tally(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred,
                                           std::size_t classes) {
  check_sizes(truth, pred);
  const std::size_t cells = classes * classes;
  std::vector<std::uint64_t> counts(cells, 0);
  const auto n = static_cast<std::int64_t>(truth.size());
  bool bad = false;
  std::uint8_t bad_value = 0;
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(cells, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const std::uint8_t t = truth[i];
      if (t >= classes) continue;
      const std::uint8_t p = pred[i];
      if (p >= classes) {
#pragma omp critical(mcae_confusion_bad)
        {
          bad = true;
          bad_value = p;
        }
        continue;
      }
      ++local[t * classes + p];
    }
#pragma omp critical(mcae_confusion_merge)
    for (std::size_t c = 0; c < cells; ++c) counts[c] += local[c];
  }
  if (bad) bad_prediction(bad_value);
  return counts;
}

NeighborLists eps_neighbors(MatrixView points, double eps) {
  NeighborLists out(points.rows);
  const auto n = static_cast<std::int64_t>(points.rows);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& list = out[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < points.rows; ++j) {
      if (cosine_distance(points.row(static_cast<std::size_t>(i)), points.row(j), points.dim) <= eps) {
        list.push_back(static_cast<std::uint32_t>(j));
      }
    }
  }
  return out;
}

void group_sums(MatrixView points, std::span<const std::uint32_t> group, std::size_t groups,
                std::vector<double>& sums, std::vector<std::uint64_t>& counts) {
  // One task per group; members summed in index order.
  std::vector<std::vector<std::uint32_t>> members(groups);
  for (std::size_t i = 0; i < points.rows; ++i) members[group[i]].push_back(static_cast<std::uint32_t>(i));
  sums.assign(groups * points.dim, 0.0);
  counts.assign(groups, 0);
  const auto ng = static_cast<std::int64_t>(groups);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t g = 0; g < ng; ++g) {
    double* acc = sums.data() + static_cast<std::size_t>(g) * points.dim;
    for (std::uint32_t i : members[static_cast<std::size_t>(g)]) {
      for (std::size_t k = 0; k < points.dim; ++k) acc[k] += points.row(i)[k];
    }
    counts[static_cast<std::size_t>(g)] = members[static_cast<std::size_t>(g)].size();
  }
}

}  // namespace omp

}  // namespace mcae::kernels
