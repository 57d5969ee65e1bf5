#pragma once

// Data-parallel inner loops. Each kernel has a plain serial version, kept as
// the reference the tests compare against, and an OpenMP version used by the
// pipeline. Both must return identical results for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mcae::kernels {

/// Row-major n x dim matrix view.
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t dim = 0;
  const float* row(std::size_t i) const { return data + i * dim; }
};

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

namespace serial {

/// K x K tally, rows = ground truth. Pixels whose truth is >= K (ignore) are
/// skipped; predictions >= K are an error.
std::vector<std::uint64_t> confusion_tally(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred,
                                           std::size_t classes);

/// For every row i: indices j (ascending, i included) with 1 - <x_i, x_j> <= eps.
NeighborLists eps_neighbors(MatrixView points, double eps);

/// Per-group sums of rows; group[i] < groups. Returns groups x dim sums and
/// per-group counts.
void group_sums(MatrixView points, std::span<const std::uint32_t> group, std::size_t groups,
                std::vector<double>& sums, std::vector<std::uint64_t>& counts);

}  // namespace serial

namespace omp {

std::vector<std::uint64_t> confusion_tally(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred,
                                           std::size_t classes);
NeighborLists eps_neighbors(MatrixView points, double eps);
void group_sums(MatrixView points, std::span<const std::uint32_t> group, std::size_t groups,
                std::vector<double>& sums, std::vector<std::uint64_t>& counts);

}  // namespace omp

/// Cosine distance on unit vectors, accumulated in double.
double cosine_distance(const float* a, const float* b, std::size_t dim);

void set_thread_count(int threads);
int thread_count();

}  // namespace mcae::kernels
