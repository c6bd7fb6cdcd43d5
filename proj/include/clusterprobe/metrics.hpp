#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "clusterprobe/dataset.hpp"
#include "clusterprobe/disentangle.hpp"
#include "clusterprobe/probe.hpp"

namespace clusterprobe {

// Predicted label per image row; rows outside the evaluated split stay empty.
using RowPredictions = std::vector<std::optional<Authenticity>>;

RowPredictions predict_split(const ProbeModel& model,
                             const EmbeddingDataset& dataset, Split split,
                             const HeadPair* heads);

// Fraction of the split's K*(N+1) images classified correctly.
double overall_accuracy(const RowPredictions& predictions,
                        const EmbeddingDataset& dataset, Split split);
// Fraction of clusters with every member classified correctly.
double full_cluster_accuracy(const RowPredictions& predictions,
                             const EmbeddingDataset& dataset, Split split);

struct DistanceAccuracy {
  double min_rate = 0.0;
  double max_rate = 0.0;
};

// Per cluster, each member's mean cosine distance (1 - dot) to the other
// members. A cluster counts for min_rate when the real image is the strict
// argmin and for max_rate when it is the strict argmax; ties count for
// neither.
DistanceAccuracy min_max_dist_accuracy(const EmbeddingDataset& dataset,
                                       Split split, FeatureSpace space,
                                       const HeadPair* heads);

inline constexpr std::size_t kDefaultRecallKs[] = {1, 3, 5};

struct RetrievalRecall {
  std::vector<std::size_t> ks;
  std::vector<double> exact_pair;
  std::vector<double> intra_cluster;
};

// Fake-image to caption retrieval over the split's caption pool, ranked by
// cosine similarity with ties broken by ascending caption row. S and T spaces
// project both modalities through the same head.
RetrievalRecall retrieval_recall(
    const EmbeddingDataset& dataset, Split split, FeatureSpace space,
    const HeadPair* heads,
    std::span<const std::size_t> ks = kDefaultRecallKs);

}  // namespace clusterprobe
