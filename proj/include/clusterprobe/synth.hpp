#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clusterprobe/dataset.hpp"

namespace clusterprobe {

struct SynthConfig {
  std::size_t clusters = 200;
  std::size_t fakes_per_cluster = 5;
  std::size_t dim = 64;
  double style_offset = 0.5;
  double semantic_noise = 0.1;
  double caption_noise = 0.1;
  std::uint64_t seed = 0;
};

// Dataset plus the planted quantities, for tests that need the ground truth.
struct SynthResult {
  EmbeddingDataset dataset;
  std::vector<double> style_direction;
  MatrixD centroids;
};

// Clustered dataset with a common fake-only style shift.
//
// Noise vectors are isotropic Gaussian scaled by 1/sqrt(D), so a noise scale
// of sigma moves a row by about sigma in Euclidean norm. Centroids are drawn
// uniformly on the unit sphere of the subspace orthogonal to the style
// direction; the style cue is then the only component separating fakes from
// reals and survives renormalization intact.
//
// Rows are laid out cluster by cluster: image rows k*(N+1) (real) followed by
// its N fakes, text rows k*N .. k*N+N-1. Clusters go to train / validation /
// test in that order with max(1, round(K/10)) clusters in each held-out split.
SynthResult generate_synthetic_with_truth(const SynthConfig& config);
EmbeddingDataset generate_synthetic(const SynthConfig& config);

}  // namespace clusterprobe
