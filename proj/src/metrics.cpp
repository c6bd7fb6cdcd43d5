#include "clusterprobe/metrics.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "clusterprobe/kernels.hpp"

namespace clusterprobe {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("metrics", msg); }

std::span<const SemanticCluster> nonempty_split(const EmbeddingDataset& dataset,
                                                Split split) {
  const auto clusters = dataset.clusters(split);
  if (clusters.empty()) {
    fail("split " + std::string(split_name(split)) + " has no clusters");
  }
  return clusters;
}

bool correct(const RowPredictions& predictions, std::size_t row,
             Authenticity truth) {
  if (row >= predictions.size() || !predictions[row]) {
    fail("missing prediction for image row " + std::to_string(row));
  }
  return *predictions[row] == truth;
}

}  // namespace

RowPredictions predict_split(const ProbeModel& model,
                             const EmbeddingDataset& dataset, Split split,
                             const HeadPair* heads) {
  const auto members = split_members(dataset, split);
  std::vector<std::size_t> rows;
  rows.reserve(members.size());
  for (const auto& m : members) rows.push_back(m.image_row);
  const auto scores = predict(model, space_features(dataset, rows, model.space, heads));
  RowPredictions out(dataset.images().rows());
  for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = scores[i].label;
  return out;
}

double overall_accuracy(const RowPredictions& predictions,
                        const EmbeddingDataset& dataset, Split split) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& c : nonempty_split(dataset, split)) {
    hits += correct(predictions, c.real_row, Authenticity::kReal) ? 1 : 0;
    for (std::size_t r : c.fake_rows) {
      hits += correct(predictions, r, Authenticity::kFake) ? 1 : 0;
    }
    total += c.member_count();
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double full_cluster_accuracy(const RowPredictions& predictions,
                             const EmbeddingDataset& dataset, Split split) {
  const auto clusters = nonempty_split(dataset, split);
  std::size_t hits = 0;
  for (const auto& c : clusters) {
    bool all = correct(predictions, c.real_row, Authenticity::kReal);
    for (std::size_t r : c.fake_rows) {
      // evaluate every row so missing predictions are always reported
      all = correct(predictions, r, Authenticity::kFake) && all;
    }
    hits += all ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(clusters.size());
}

DistanceAccuracy min_max_dist_accuracy(const EmbeddingDataset& dataset,
                                       Split split, FeatureSpace space,
                                       const HeadPair* heads) {
  const auto clusters = nonempty_split(dataset, split);
  const auto members = split_members(dataset, split);
  std::vector<std::size_t> rows;
  rows.reserve(members.size());
  for (const auto& m : members) rows.push_back(m.image_row);
  const MatrixD features = space_features(dataset, rows, space, heads);

  std::size_t min_hits = 0;
  std::size_t max_hits = 0;
  std::size_t offset = 0;
  std::vector<double> mean_distance;
  for (const auto& c : clusters) {
    const std::size_t m = c.member_count();
    if (m < 2) fail("cluster " + c.cluster_id + " has no fakes");
    mean_distance.assign(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
      const auto fa = features.row(offset + a);
      double sum = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        if (b == a) continue;
        const auto fb = features.row(offset + b);
        double dot = 0.0;
        for (std::size_t k = 0; k < fa.size(); ++k) dot += fa[k] * fb[k];
        sum += 1.0 - dot;
      }
      mean_distance[a] = sum / static_cast<double>(m - 1);
    }
    // member 0 is the real image
    const double real = mean_distance[0];
    bool is_min = true;
    bool is_max = true;
    for (std::size_t a = 1; a < m; ++a) {
      is_min = is_min && real < mean_distance[a];
      is_max = is_max && real > mean_distance[a];
    }
    min_hits += is_min ? 1 : 0;
    max_hits += is_max ? 1 : 0;
    offset += m;
  }
  const double k = static_cast<double>(clusters.size());
  return {static_cast<double>(min_hits) / k, static_cast<double>(max_hits) / k};
}

RetrievalRecall retrieval_recall(const EmbeddingDataset& dataset, Split split,
                                 FeatureSpace space, const HeadPair* heads,
                                 std::span<const std::size_t> ks) {
  const auto clusters = nonempty_split(dataset, split);
  std::vector<std::size_t> pool;
  std::vector<std::size_t> fakes;
  for (const auto& c : clusters) {
    if (c.caption_rows.empty()) {
      fail("cluster " + c.cluster_id + " has no captions; retrieval needs text rows");
    }
    pool.insert(pool.end(), c.caption_rows.begin(), c.caption_rows.end());
    fakes.insert(fakes.end(), c.fake_rows.begin(), c.fake_rows.end());
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (pool.empty()) fail("empty caption pool");
  std::unordered_map<std::size_t, std::size_t> pool_index;
  for (std::size_t i = 0; i < pool.size(); ++i) pool_index.emplace(pool[i], i);

  const MatrixD images = space_features(dataset, fakes, space, heads);
  const MatrixD texts = space_text_features(dataset, pool, space, heads);
  MatrixD sim;
  kernels::multiply_abt(images, texts, sim);

  // pool is sorted by row, so "ahead of j" is: larger similarity, or equal
  // similarity at a smaller pool position.
  auto rank_of = [&](std::size_t query, std::size_t j) {
    const double target = sim(query, j);
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const double s = sim(query, c);
      ahead += (s > target || (s == target && c < j)) ? 1 : 0;
    }
    return ahead + 1;
  };

  RetrievalRecall out;
  out.ks.assign(ks.begin(), ks.end());
  std::vector<std::size_t> exact_hits(ks.size(), 0);
  std::vector<std::size_t> intra_hits(ks.size(), 0);
  std::size_t query = 0;
  for (const auto& c : clusters) {
    for (std::size_t i = 0; i < c.fake_rows.size(); ++i, ++query) {
      const std::size_t target = pool_index.at(c.caption_rows[i]);
      std::size_t best = pool_index.at(c.caption_rows[0]);
      for (std::size_t row : c.caption_rows) {
        const std::size_t j = pool_index.at(row);
        if (sim(query, j) > sim(query, best) ||
            (sim(query, j) == sim(query, best) && j < best)) {
          best = j;
        }
      }
      const std::size_t exact_rank = rank_of(query, target);
      const std::size_t intra_rank = rank_of(query, best);
      for (std::size_t k = 0; k < ks.size(); ++k) {
        exact_hits[k] += exact_rank <= ks[k] ? 1 : 0;
        intra_hits[k] += intra_rank <= ks[k] ? 1 : 0;
      }
    }
  }
  const double n = static_cast<double>(fakes.size());
  for (std::size_t k = 0; k < ks.size(); ++k) {
    out.exact_pair.push_back(static_cast<double>(exact_hits[k]) / n);
    out.intra_cluster.push_back(static_cast<double>(intra_hits[k]) / n);
  }
  return out;
}

}  // namespace clusterprobe
