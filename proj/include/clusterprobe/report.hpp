#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "clusterprobe/dataset.hpp"
#include "clusterprobe/metrics.hpp"
#include "clusterprobe/probe.hpp"

namespace clusterprobe {

struct MetricReport {
  Split split = Split::kValidation;
  FeatureSpace space = FeatureSpace::kRaw;
  double overall_accuracy = 0.0;
  double full_cluster_accuracy = 0.0;
  DistanceAccuracy distance;
  // Absent when the dataset carries no caption embeddings.
  std::optional<RetrievalRecall> retrieval;
  // Resolved configuration and input hashes, echoed verbatim.
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

// Throws Error("metrics", ...) if a rate leaves [0, 1] or recall@k is not
// monotone in k.
void check_report(const MetricReport& report);

nlohmann::ordered_json to_json(const MetricReport& report);

// Computes every metric for one split and space.
MetricReport evaluate(const EmbeddingDataset& dataset, Split split,
                      const ProbeModel& probe, const HeadPair* heads);

}  // namespace clusterprobe
