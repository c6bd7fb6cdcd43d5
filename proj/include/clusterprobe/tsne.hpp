#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clusterprobe/kernels.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe {

inline constexpr std::size_t kTsneMaxPoints = 5000;

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  // KL divergence is recorded every kl_interval iterations and at the end.
  std::size_t kl_interval = 50;
  std::uint64_t seed = 0;
};

struct KlCheckpoint {
  std::size_t iteration;  // number of completed descent steps
  double kl;
};

struct TsneResult {
  MatrixD coordinates;  // n x 2
  std::vector<KlCheckpoint> kl_trace;
};

// Symmetrized input affinities. Each row's Gaussian bandwidth is found by
// bisection until the conditional entropy matches log(perplexity) within 1e-5.
MatrixD tsne_affinities(const MatrixD& features, double perplexity,
                        kernels::Backend backend = kernels::Backend::kParallel);

// KL(P || Q) for 2-D coordinates.
double tsne_kl_divergence(const MatrixD& p, const MatrixD& y);

// Exact O(n^2) t-SNE.
TsneResult tsne_embed(const MatrixD& features, const TsneConfig& config,
                      kernels::Backend backend = kernels::Backend::kParallel);

}  // namespace clusterprobe
