#include <algorithm>
#include <span>

#include "clusterprobe/kernels.hpp"
#include <omp.h>

#include "rows.hpp"

namespace clusterprobe::kernels::parallel {

namespace {
using Index = std::ptrdiff_t;
}

void multiply_abt(const MatrixD& a, const MatrixD& b, MatrixD& out) {
  rows::check_shapes(a.cols() == b.cols(), "multiply_abt: inner dimension mismatch");
  out.resize(a.rows(), b.rows());
  const Index m = static_cast<Index>(a.rows());
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) rows::multiply_abt_row(a, b, out, static_cast<std::size_t>(i));
}

void multiply_ab(const MatrixD& a, const MatrixD& b, MatrixD& out) {
  rows::check_shapes(a.cols() == b.rows(), "multiply_ab: inner dimension mismatch");
  out.resize(a.rows(), b.cols());
  const Index m = static_cast<Index>(a.rows());
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) rows::multiply_ab_row(a, b, out, static_cast<std::size_t>(i));
}

void multiply_atb(const MatrixD& a, const MatrixD& b, MatrixD& out) {
  rows::check_shapes(a.rows() == b.rows(), "multiply_atb: row count mismatch");
  out.resize(a.cols(), b.cols());
  const Index k = static_cast<Index>(a.cols());
  #pragma omp parallel for schedule(static)
  for (Index r = 0; r < k; ++r) rows::multiply_atb_row(a, b, out, static_cast<std::size_t>(r));
}

void squared_distances(const MatrixD& x, MatrixD& out) {
  out.resize(x.rows(), x.rows());
  const Index n = static_cast<Index>(x.rows());
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) rows::squared_distances_row(x, out, static_cast<std::size_t>(i));
}

void supcon_rows(const MatrixD& sim, std::span<const int> labels,
                 MatrixD& coeff, std::span<double> terms) {
  rows::check_shapes(sim.rows() == sim.cols() && labels.size() == sim.rows() &&
                         terms.size() == sim.rows(),
                     "supcon_rows: shape mismatch");
  coeff.resize(sim.rows(), sim.cols());
  const Index n = static_cast<Index>(sim.rows());
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) rows::supcon_row(sim, labels, coeff, terms, static_cast<std::size_t>(i));
}

void tsne_gradient(const MatrixD& p, const MatrixD& y, double exaggeration,
                   MatrixD& grad, std::span<double> row_kernel_sums) {
  rows::check_shapes(y.cols() == 2 && p.rows() == y.rows() && p.cols() == y.rows() &&
                         row_kernel_sums.size() == y.rows(),
                     "tsne_gradient: shape mismatch");
  grad.resize(y.rows(), 2);
  const Index n = static_cast<Index>(y.rows());
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    rows::tsne_gradient_row(p, y, exaggeration, grad, row_kernel_sums, static_cast<std::size_t>(i));
  }
  double total = 0.0;
  for (double s : row_kernel_sums) total += s;
  const double inv_total = 1.0 / total;
  #pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) rows::tsne_repulsion_row(y, inv_total, grad, static_cast<std::size_t>(i));
}

}  // namespace clusterprobe::kernels::parallel

namespace clusterprobe::kernels {

void multiply_abt(const MatrixD& a, const MatrixD& b, MatrixD& out, Backend backend) {
  backend == Backend::kSerial ? serial::multiply_abt(a, b, out) : parallel::multiply_abt(a, b, out);
}

void multiply_ab(const MatrixD& a, const MatrixD& b, MatrixD& out, Backend backend) {
  backend == Backend::kSerial ? serial::multiply_ab(a, b, out) : parallel::multiply_ab(a, b, out);
}

void multiply_atb(const MatrixD& a, const MatrixD& b, MatrixD& out, Backend backend) {
  backend == Backend::kSerial ? serial::multiply_atb(a, b, out) : parallel::multiply_atb(a, b, out);
}

void squared_distances(const MatrixD& x, MatrixD& out, Backend backend) {
  backend == Backend::kSerial ? serial::squared_distances(x, out) : parallel::squared_distances(x, out);
}

void supcon_rows(const MatrixD& sim, std::span<const int> labels, MatrixD& coeff,
                 std::span<double> terms, Backend backend) {
  if (backend == Backend::kSerial) {
    serial::supcon_rows(sim, labels, coeff, terms);
  } else {
    parallel::supcon_rows(sim, labels, coeff, terms);
  }
}

void tsne_gradient(const MatrixD& p, const MatrixD& y, double exaggeration, MatrixD& grad,
                   std::span<double> row_kernel_sums, Backend backend) {
  if (backend == Backend::kSerial) {
    serial::tsne_gradient(p, y, exaggeration, grad, row_kernel_sums);
  } else {
    parallel::tsne_gradient(p, y, exaggeration, grad, row_kernel_sums);
  }
}

namespace {
int default_threads = 0;
}

void set_thread_count(int threads) {
  if (default_threads == 0) default_threads = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : default_threads);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace clusterprobe::kernels
