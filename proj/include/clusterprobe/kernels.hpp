#pragma once

#include <cstddef>
#include <span>

#include "clusterprobe/matrix.hpp"

// Dense kernels behind the training loop, the metrics and t-SNE.
//
// Every kernel has a serial reference in kernels::serial and an OpenMP
// version in kernels::parallel. The parallel versions split work over output
// rows only; each output element is reduced in the same order as the serial
// loop, so both backends return bit-identical results for any thread count.
namespace clusterprobe::kernels {

enum class Backend { kSerial, kParallel };

#define CLUSTERPROBE_KERNEL_DECLS                                              \
  /* out(i, j) = <a_i, b_j>; a is m x k, b is n x k, out is m x n. */         \
  void multiply_abt(const MatrixD& a, const MatrixD& b, MatrixD& out);        \
  /* out = a * b; a is m x k, b is k x n. */                                  \
  void multiply_ab(const MatrixD& a, const MatrixD& b, MatrixD& out);         \
  /* out = a^T * b; a is m x k, b is m x n, out is k x n. */                  \
  void multiply_atb(const MatrixD& a, const MatrixD& b, MatrixD& out);        \
  /* out(i, j) = ||x_i - x_j||^2 from coordinate differences. */              \
  void squared_distances(const MatrixD& x, MatrixD& out);                     \
  /* Per-anchor supervised-contrastive pass over a similarity matrix already  \
     divided by the temperature. Writes each anchor's loss term and the       \
     coefficient row d(term_i)/d(sim_ij). Anchors without positives get 0. */ \
  void supcon_rows(const MatrixD& sim, std::span<const int> labels,           \
                   MatrixD& coeff, std::span<double> terms);                  \
  /* t-SNE gradient for 2-D output y under affinities p (scaled by            \
     exaggeration). Fills grad and the per-row Student-t kernel sums. */      \
  void tsne_gradient(const MatrixD& p, const MatrixD& y, double exaggeration,  \
                     MatrixD& grad, std::span<double> row_kernel_sums);

namespace serial {
CLUSTERPROBE_KERNEL_DECLS
}  // namespace serial

namespace parallel {
CLUSTERPROBE_KERNEL_DECLS
}  // namespace parallel

#undef CLUSTERPROBE_KERNEL_DECLS

void multiply_abt(const MatrixD& a, const MatrixD& b, MatrixD& out,
                  Backend backend = Backend::kParallel);
void multiply_ab(const MatrixD& a, const MatrixD& b, MatrixD& out,
                 Backend backend = Backend::kParallel);
void multiply_atb(const MatrixD& a, const MatrixD& b, MatrixD& out,
                  Backend backend = Backend::kParallel);
void squared_distances(const MatrixD& x, MatrixD& out,
                       Backend backend = Backend::kParallel);
void supcon_rows(const MatrixD& sim, std::span<const int> labels,
                 MatrixD& coeff, std::span<double> terms,
                 Backend backend = Backend::kParallel);
void tsne_gradient(const MatrixD& p, const MatrixD& y, double exaggeration,
                   MatrixD& grad, std::span<double> row_kernel_sums,
                   Backend backend = Backend::kParallel);

// Upper bound on OpenMP threads used by kernels::parallel. 0 restores the
// runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace clusterprobe::kernels
