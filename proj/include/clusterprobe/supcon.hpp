#pragma once

#include <span>
#include <vector>

#include "clusterprobe/kernels.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe {

inline constexpr double kDefaultTemperature = 0.1;

// A batch of unit-norm features with integer labels. Anchors whose label
// occurs only once have no positives and contribute nothing.
struct ContrastiveBatch {
  MatrixD features;
  std::vector<int> labels;
  double temperature = kDefaultTemperature;
};

struct SupConResult {
  double loss = 0.0;
  MatrixD gradient;  // d loss / d features, same shape as the features
};

// Supervised contrastive loss, summed over anchors:
//   sum_i -1/|P(i)| sum_{p in P(i)} log( exp(f_i.f_p / t) / sum_{a != i} exp(f_i.f_a / t) )
// with P(i) the other indices sharing i's label. The log-partition uses a
// max shift; all accumulation is in double.
double supcon_loss(const MatrixD& features, std::span<const int> labels,
                   double temperature,
                   kernels::Backend backend = kernels::Backend::kParallel);
SupConResult supcon_loss_and_grad(
    const MatrixD& features, std::span<const int> labels, double temperature,
    kernels::Backend backend = kernels::Backend::kParallel);

inline double supcon_loss(const ContrastiveBatch& batch) {
  return supcon_loss(batch.features, batch.labels, batch.temperature);
}
inline MatrixD supcon_grad(const ContrastiveBatch& batch) {
  return supcon_loss_and_grad(batch.features, batch.labels, batch.temperature)
      .gradient;
}

// Largest value the loss can take for a batch of this size: every anchor term
// lies in [0, ln(B - 1) + 2 / t].
double supcon_upper_bound(std::size_t batch_size, double temperature);

}  // namespace clusterprobe
