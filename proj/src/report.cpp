#include "clusterprobe/report.hpp"

#include <cmath>

namespace clusterprobe {

namespace {

using Json = nlohmann::ordered_json;

Json rate(double value) {
  Json j;
  j["rate"] = value;
  // two-decimal percentage as printed in result tables
  j["percent"] = std::round(value * 10000.0) / 100.0;
  return j;
}

void check_rate(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error("metrics", std::string(name) + " outside [0, 1]");
  }
}

void check_monotone(const std::vector<double>& values, const char* name) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    check_rate(values[i], name);
    if (i > 0 && values[i] < values[i - 1]) {
      throw Error("metrics", std::string(name) + " recall is not monotone in k");
    }
  }
}

Json recall_family(const std::vector<std::size_t>& ks, const std::vector<double>& values) {
  Json j = Json::object();
  for (std::size_t i = 0; i < ks.size(); ++i) j["R@" + std::to_string(ks[i])] = rate(values[i]);
  return j;
}

}  // namespace

void check_report(const MetricReport& r) {
  check_rate(r.overall_accuracy, "overall_accuracy");
  check_rate(r.full_cluster_accuracy, "full_cluster_accuracy");
  check_rate(r.distance.min_rate, "min_dist_accuracy");
  check_rate(r.distance.max_rate, "max_dist_accuracy");
  if (r.retrieval) {
    check_monotone(r.retrieval->exact_pair, "exact_pair");
    check_monotone(r.retrieval->intra_cluster, "intra_cluster");
  }
}

Json to_json(const MetricReport& r) {
  Json j;
  j["split"] = split_name(r.split);
  j["feature_space"] = space_name(r.space);
  j["overall_accuracy"] = rate(r.overall_accuracy);
  j["full_cluster_accuracy"] = rate(r.full_cluster_accuracy);
  j["min_dist_accuracy"] = rate(r.distance.min_rate);
  j["max_dist_accuracy"] = rate(r.distance.max_rate);
  if (r.retrieval) {
    j["exact_pair_recall"] = recall_family(r.retrieval->ks, r.retrieval->exact_pair);
    j["intra_cluster_recall"] = recall_family(r.retrieval->ks, r.retrieval->intra_cluster);
  } else {
    j["exact_pair_recall"] = nullptr;
    j["intra_cluster_recall"] = nullptr;
  }
  j["config"] = r.config;
  return j;
}

MetricReport evaluate(const EmbeddingDataset& dataset, Split split,
                      const ProbeModel& probe, const HeadPair* heads) {
  MetricReport r;
  r.split = split;
  r.space = probe.space;
  const auto predictions = predict_split(probe, dataset, split, heads);
  r.overall_accuracy = overall_accuracy(predictions, dataset, split);
  r.full_cluster_accuracy = full_cluster_accuracy(predictions, dataset, split);
  r.distance = min_max_dist_accuracy(dataset, split, probe.space, heads);
  if (dataset.has_captions()) {
    r.retrieval = retrieval_recall(dataset, split, probe.space, heads);
  }
  check_report(r);
  return r;
}

}  // namespace clusterprobe
