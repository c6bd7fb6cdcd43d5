#include <doctest.h>

#include <cmath>
#include <vector>

#include "clusterprobe/disentangle.hpp"
#include "clusterprobe/metrics.hpp"
#include "clusterprobe/random.hpp"
#include "clusterprobe/report.hpp"
#include "oracles.hpp"

using namespace clusterprobe;

namespace {

EmbeddingDataset two_clusters_of_six() {
  MatrixF images(12, 2, 0.0f);
  for (std::size_t r = 0; r < 12; ++r) images(r, 0) = 1.0f;
  SplitClusters s;
  s[1].push_back({"a", 0, {1, 2, 3, 4, 5}, {}, {}});
  s[1].push_back({"b", 6, {7, 8, 9, 10, 11}, {}, {}});
  return EmbeddingDataset(2, images, MatrixF(), s, true);
}

EmbeddingDataset single_cluster(std::vector<std::vector<float>> members) {
  const std::size_t dim = members[0].size();
  MatrixF images(members.size(), dim);
  SemanticCluster c{"x", 0, {}, {}, {}};
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) images(i, k) = members[i][k];
    if (i > 0) c.fake_rows.push_back(i);
  }
  SplitClusters s;
  s[1].push_back(c);
  return EmbeddingDataset(dim, images, MatrixF(), s, true);
}

}  // namespace

TEST_CASE("accuracy worked examples") {
  const auto d = two_clusters_of_six();
  RowPredictions p(12);
  for (std::size_t r = 0; r < 12; ++r) p[r] = r % 6 == 0 ? Authenticity::kReal : Authenticity::kFake;
  CHECK(overall_accuracy(p, d, Split::kValidation) == 1.0);
  CHECK(full_cluster_accuracy(p, d, Split::kValidation) == 1.0);
  p[3] = Authenticity::kReal;
  CHECK(overall_accuracy(p, d, Split::kValidation) == doctest::Approx(11.0 / 12.0));
  CHECK(full_cluster_accuracy(p, d, Split::kValidation) == 0.5);
  p[3].reset();
  CHECK_THROWS_AS(overall_accuracy(p, d, Split::kValidation), Error);
  CHECK_THROWS_AS(full_cluster_accuracy(p, d, Split::kValidation), Error);
  CHECK_THROWS_AS(overall_accuracy(p, d, Split::kTest), Error);
}

TEST_CASE("real at the pole is the strict minimum") {
  const auto d = single_cluster({{0, 0, 1}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}});
  const auto a = min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  CHECK(a.min_rate == 1.0);
  CHECK(a.max_rate == 0.0);
}

TEST_CASE("real far from a tight fake clump is the strict maximum") {
  const float c = std::sqrt(0.5f);
  const auto d = single_cluster({{-1, 0}, {1, 0}, {c, c}, {c, -c}});
  const auto a = min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  CHECK(a.min_rate == 0.0);
  CHECK(a.max_rate == 1.0);
}

TEST_CASE("ties count as failures") {
  const auto d = single_cluster({{1, 0}, {1, 0}, {1, 0}});
  const auto a = min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  CHECK(a.min_rate == 0.0);
  CHECK(a.max_rate == 0.0);
}

TEST_CASE("self-retrieval is perfect") {
  Rng rng(1);
  auto base = oracle::random_dataset(rng, 5, 3, 8);
  MatrixF images = base.images();
  for (const auto& c : base.clusters(Split::kValidation)) {
    for (std::size_t i = 0; i < c.fake_rows.size(); ++i) {
      for (std::size_t k = 0; k < 8; ++k) images(c.fake_rows[i], k) = base.texts()(c.caption_rows[i], k);
    }
  }
  const EmbeddingDataset d(8, images, base.texts(), base.splits(), true);
  const auto r = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  CHECK(r.ks == std::vector<std::size_t>{1, 3, 5});
  for (double v : r.exact_pair) CHECK(v == 1.0);
  for (double v : r.intra_cluster) CHECK(v == 1.0);
}

TEST_CASE("retrieval ties go to the lower caption row") {
  MatrixF texts(2, 2, std::vector<float>{0, 1, 0, 1});
  MatrixF im(4, 2, std::vector<float>{1, 0, 1, 0, 1, 0, 1, 0});
  SplitClusters t;
  t[1].push_back({"a", 0, {1}, {1}, {}});
  t[1].push_back({"b", 2, {3}, {0}, {}});
  const EmbeddingDataset d(2, im, texts, t, true);
  const auto r = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  // Both fakes rank caption 0 first.
  CHECK(r.exact_pair[0] == 0.5);
  CHECK(r.exact_pair[1] == 1.0);
}

TEST_CASE("retrieval requires captions") {
  const auto d = two_clusters_of_six();
  CHECK_THROWS_AS(retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr), Error);
}

TEST_CASE("all six metrics match the brute-force oracle on 100 random datasets") {
  Rng rng(2024);
  const std::vector<std::size_t> ks{1, 3, 5};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(8);
    const std::size_t n = 1 + rng.uniform_index(4);
    const std::size_t dim = 2 + rng.uniform_index(7);
    const auto d = oracle::random_dataset(rng, k, n, dim);
    const auto p = oracle::random_predictions(rng, d, 0.2);
    CAPTURE(trial);
    CHECK(overall_accuracy(p, d, Split::kValidation) == oracle::overall(p, d, Split::kValidation));
    CHECK(full_cluster_accuracy(p, d, Split::kValidation) == oracle::full_cluster(p, d, Split::kValidation));
    const auto dist = min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
    const auto [omin, omax] = oracle::min_max(d, Split::kValidation);
    CHECK(dist.min_rate == omin);
    CHECK(dist.max_rate == omax);
    const auto r = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
    std::vector<double> exact, intra;
    oracle::recall(d, Split::kValidation, ks, exact, intra);
    CHECK(r.exact_pair == exact);
    CHECK(r.intra_cluster == intra);
  }
}

TEST_CASE("recall is monotone and full-cluster never exceeds overall") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = oracle::random_dataset(rng, 1 + rng.uniform_index(8), 1 + rng.uniform_index(4), 2 + rng.uniform_index(7));
    const auto p = oracle::random_predictions(rng, d, rng.uniform());
    CHECK(full_cluster_accuracy(p, d, Split::kValidation) <= overall_accuracy(p, d, Split::kValidation));
    const auto r = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
    for (std::size_t i = 1; i < r.ks.size(); ++i) {
      CHECK(r.exact_pair[i - 1] <= r.exact_pair[i]);
      CHECK(r.intra_cluster[i - 1] <= r.intra_cluster[i]);
    }
    for (std::size_t i = 0; i < r.ks.size(); ++i) CHECK(r.exact_pair[i] <= r.intra_cluster[i]);
  }
}

TEST_CASE("an orthogonal head leaves distance and retrieval metrics unchanged") {
  Rng rng(11);
  const std::size_t dim = 6;
  // Orthogonal matrix by Gram-Schmidt.
  MatrixD q(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (auto& v : q.row(i)) v = rng.normal();
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < dim; ++k) dot += q(i, k) * q(j, k);
      for (std::size_t k = 0; k < dim; ++k) q(i, k) -= dot * q(j, k);
    }
    double n2 = 0;
    for (double v : q.row(i)) n2 += v * v;
    for (auto& v : q.row(i)) v /= std::sqrt(n2);
  }
  HeadPair heads{{q.cast<float>(), HeadKind::kStyle}, {q.cast<float>(), HeadKind::kSemantics}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = oracle::random_dataset(rng, 6, 4, dim);
    const auto raw_dist = min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
    const auto raw_ret = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
    for (FeatureSpace s : {FeatureSpace::kSemantics, FeatureSpace::kStyle}) {
      const auto dist = min_max_dist_accuracy(d, Split::kValidation, s, &heads);
      const auto ret = retrieval_recall(d, Split::kValidation, s, &heads);
      CHECK(std::abs(dist.min_rate - raw_dist.min_rate) <= 1e-5);
      CHECK(std::abs(dist.max_rate - raw_dist.max_rate) <= 1e-5);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(ret.exact_pair[i] - raw_ret.exact_pair[i]) <= 1e-5);
        CHECK(std::abs(ret.intra_cluster[i] - raw_ret.intra_cluster[i]) <= 1e-5);
      }
    }
  }
  const auto d = oracle::random_dataset(rng, 2, 2, dim);
  CHECK_THROWS_AS(min_max_dist_accuracy(d, Split::kValidation, FeatureSpace::kStyle, nullptr), Error);
}

TEST_CASE("report json and range checks") {
  Rng rng(3);
  const auto d = oracle::random_dataset(rng, 4, 3, 5);
  MetricReport r;
  r.overall_accuracy = 0.75;
  r.full_cluster_accuracy = 0.5;
  r.distance = {0.25, 0.5};
  r.retrieval = retrieval_recall(d, Split::kValidation, FeatureSpace::kRaw, nullptr);
  CHECK_NOTHROW(check_report(r));
  const auto j = to_json(r);
  CHECK(j["split"] == "validation");
  CHECK(j["feature_space"] == "raw");
  CHECK(j["overall_accuracy"]["rate"] == 0.75);
  CHECK(j["overall_accuracy"]["percent"] == 75.0);
  CHECK(j["min_dist_accuracy"]["rate"] == 0.25);
  CHECK(j["exact_pair_recall"].contains("R@5"));
  CHECK(j["intra_cluster_recall"]["R@1"].contains("percent"));

  r.retrieval.reset();
  CHECK(to_json(r)["exact_pair_recall"].is_null());
  r.overall_accuracy = 1.5;
  CHECK_THROWS_AS(check_report(r), Error);
  r.overall_accuracy = 0.5;
  r.retrieval = RetrievalRecall{{1, 3}, {0.5, 0.25}, {0.5, 0.5}};
  CHECK_THROWS_AS(check_report(r), Error);
}
