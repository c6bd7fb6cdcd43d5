#pragma once

// Single-row bodies shared by the serial and OpenMP kernel drivers. Keeping
// one definition per row is what makes the two backends bit-identical.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "clusterprobe/error.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe::kernels::rows {

inline void multiply_abt_row(const MatrixD& a, const MatrixD& b, MatrixD& out,
                             std::size_t i) {
  const auto ai = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const auto bj = b.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * bj[k];
    out(i, j) = acc;
  }
}

inline void multiply_ab_row(const MatrixD& a, const MatrixD& b, MatrixD& out,
                            std::size_t i) {
  auto oi = out.row(i);
  for (auto& v : oi) v = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    if (aik == 0.0) continue;
    const auto bk = b.row(k);
    for (std::size_t j = 0; j < oi.size(); ++j) oi[j] += aik * bk[j];
  }
}

inline void multiply_atb_row(const MatrixD& a, const MatrixD& b, MatrixD& out,
                             std::size_t r) {
  auto orow = out.row(r);
  for (auto& v : orow) v = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double air = a(i, r);
    if (air == 0.0) continue;
    const auto bi = b.row(i);
    for (std::size_t c = 0; c < orow.size(); ++c) orow[c] += air * bi[c];
  }
}

inline void squared_distances_row(const MatrixD& x, MatrixD& out,
                                  std::size_t i) {
  const auto xi = x.row(i);
  for (std::size_t j = 0; j < x.rows(); ++j) {
    const auto xj = x.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
      const double d = xi[k] - xj[k];
      acc += d * d;
    }
    out(i, j) = acc;
  }
}

inline void supcon_row(const MatrixD& sim, std::span<const int> labels,
                       MatrixD& coeff, std::span<double> terms, std::size_t i) {
  const std::size_t n = sim.rows();
  auto ci = coeff.row(i);
  std::size_t positives = 0;
  double max_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    if (a == i) continue;
    if (labels[a] == labels[i]) ++positives;
    if (sim(i, a) > max_sim) max_sim = sim(i, a);
  }
  if (positives == 0) {
    for (auto& v : ci) v = 0.0;
    terms[i] = 0.0;
    return;
  }
  double denom = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a != i) denom += std::exp(sim(i, a) - max_sim);
  }
  const double log_norm = max_sim + std::log(denom);
  const double inv_pos = 1.0 / static_cast<double>(positives);
  double positive_sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a == i) {
      ci[a] = 0.0;
      continue;
    }
    double c = std::exp(sim(i, a) - log_norm);
    if (labels[a] == labels[i]) {
      positive_sum += sim(i, a);
      c -= inv_pos;
    }
    ci[a] = c;
  }
  terms[i] = log_norm - positive_sum * inv_pos;
}

inline void tsne_gradient_row(const MatrixD& p, const MatrixD& y,
                              double exaggeration, MatrixD& grad,
                              std::span<double> row_kernel_sums,
                              std::size_t i) {
  // First pass: Student-t kernel row sum. Second pass needs the global sum, so
  // the driver finishes the gradient after all rows are done.
  const std::size_t n = y.rows();
  double sum = 0.0;
  double gx = 0.0;
  double gy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double dx = y(i, 0) - y(j, 0);
    const double dy = y(i, 1) - y(j, 1);
    const double kernel = 1.0 / (1.0 + dx * dx + dy * dy);
    sum += kernel;
    const double attract = exaggeration * p(i, j) * kernel;
    gx += attract * dx;
    gy += attract * dy;
  }
  row_kernel_sums[i] = sum;
  grad(i, 0) = gx;
  grad(i, 1) = gy;
}

inline void tsne_repulsion_row(const MatrixD& y, double inv_total, MatrixD& grad,
                               std::size_t i) {
  const std::size_t n = y.rows();
  double rx = 0.0;
  double ry = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double dx = y(i, 0) - y(j, 0);
    const double dy = y(i, 1) - y(j, 1);
    const double kernel = 1.0 / (1.0 + dx * dx + dy * dy);
    const double q = kernel * inv_total;
    rx += q * kernel * dx;
    ry += q * kernel * dy;
  }
  grad(i, 0) = 4.0 * (grad(i, 0) - rx);
  grad(i, 1) = 4.0 * (grad(i, 1) - ry);
}

inline void check_shapes(bool ok, const char* what) {
  if (!ok) throw Error("kernels", what);
}

}  // namespace clusterprobe::kernels::rows
