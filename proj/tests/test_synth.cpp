#include <doctest.h>

#include <cmath>
#include <vector>

#include "clusterprobe/metrics.hpp"
#include "clusterprobe/probe.hpp"
#include "clusterprobe/synth.hpp"

using namespace clusterprobe;

namespace {

double norm(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("shape, layout and splits") {
  SynthConfig cfg;
  cfg.clusters = 10;
  cfg.dim = 16;
  const auto d = generate_synthetic(cfg);
  CHECK(d.images().rows() == 60);
  CHECK(d.texts().rows() == 50);
  CHECK(d.dim() == 16);
  CHECK(d.normalized());
  CHECK(d.clusters(Split::kTrain).size() == 8);
  CHECK(d.clusters(Split::kValidation).size() == 1);
  CHECK(d.clusters(Split::kTest).size() == 1);

  const auto& c = d.clusters(Split::kValidation)[0];
  CHECK(c.cluster_id == "synth-8");
  CHECK(c.real_row == 48);
  CHECK(c.fake_rows == std::vector<std::size_t>{49, 50, 51, 52, 53});
  CHECK(c.caption_rows == std::vector<std::size_t>{40, 41, 42, 43, 44});
  for (std::size_t r = 0; r < 60; ++r) CHECK(norm(d.images().row(r)) == doctest::Approx(1.0).epsilon(1e-5));

  cfg.clusters = 200;
  const auto big = generate_synthetic(cfg);
  CHECK(big.clusters(Split::kTrain).size() == 160);
  CHECK(big.clusters(Split::kValidation).size() == 20);
  CHECK(big.clusters(Split::kTest).size() == 20);
}

TEST_CASE("zero noise makes all fakes of a cluster identical") {
  SynthConfig cfg;
  cfg.clusters = 5;
  cfg.dim = 8;
  cfg.semantic_noise = 0.0;
  cfg.caption_noise = 0.0;
  const auto d = generate_synthetic(cfg);
  for (Split s : kAllSplits) {
    for (const auto& c : d.clusters(s)) {
      for (auto r : c.fake_rows) {
        for (std::size_t k = 0; k < 8; ++k) CHECK(d.images()(r, k) == d.images()(c.fake_rows[0], k));
      }
      for (auto r : c.caption_rows) {
        for (std::size_t k = 0; k < 8; ++k) CHECK(d.texts()(r, k) == d.texts()(c.caption_rows[0], k));
      }
    }
  }
}

TEST_CASE("same seed gives the same bytes, different seed does not") {
  SynthConfig cfg;
  cfg.clusters = 12;
  cfg.dim = 8;
  cfg.seed = 42;
  CHECK(generate_synthetic(cfg) == generate_synthetic(cfg));
  auto other = cfg;
  other.seed = 43;
  CHECK(!(generate_synthetic(other) == generate_synthetic(cfg)));
}

TEST_CASE("mean fake-minus-real offset aligns with the planted style direction") {
  SynthConfig cfg;
  const auto truth = generate_synthetic_with_truth(cfg);
  const auto& d = truth.dataset;
  std::vector<double> mean(cfg.dim, 0.0);
  std::size_t count = 0;
  for (Split s : kAllSplits) {
    for (const auto& c : d.clusters(s)) {
      for (auto r : c.fake_rows) {
        for (std::size_t k = 0; k < cfg.dim; ++k) mean[k] += d.images()(r, k) - d.images()(c.real_row, k);
        ++count;
      }
    }
  }
  double dot = 0, n2 = 0, s2 = 0;
  for (std::size_t k = 0; k < cfg.dim; ++k) {
    dot += mean[k] * truth.style_direction[k];
    n2 += mean[k] * mean[k];
    s2 += truth.style_direction[k] * truth.style_direction[k];
  }
  CHECK(count == 1000);
  CHECK(s2 == doctest::Approx(1.0));
  CHECK(dot / std::sqrt(n2 * s2) > 0.9);

  // Centroids are unit vectors orthogonal to the style direction.
  for (std::size_t k = 0; k < truth.centroids.rows(); ++k) {
    double c2 = 0, cs = 0;
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      c2 += truth.centroids(k, j) * truth.centroids(k, j);
      cs += truth.centroids(k, j) * truth.style_direction[j];
    }
    CHECK(c2 == doctest::Approx(1.0));
    CHECK(std::abs(cs) < 1e-12);
  }
}

TEST_CASE("default dataset is linearly separable by a raw probe") {
  const auto d = generate_synthetic(SynthConfig{});
  const auto probe = fit_probe(d, FeatureSpace::kRaw, nullptr, kDefaultProbeLambda, 0);
  const auto preds = predict_split(probe, d, Split::kTest, nullptr);
  CHECK(overall_accuracy(preds, d, Split::kTest) >= 0.99);
}

TEST_CASE("invalid configurations are rejected") {
  SynthConfig cfg;
  cfg.clusters = 2;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = {};
  cfg.dim = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = {};
  cfg.fakes_per_cluster = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = {};
  cfg.semantic_noise = -0.1;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = {};
  cfg.style_offset = std::nan("");
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
}
