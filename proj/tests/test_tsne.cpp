#include <doctest.h>

#include <cmath>
#include <vector>

#include "clusterprobe/random.hpp"
#include "clusterprobe/synth.hpp"
#include "clusterprobe/tsne.hpp"

using namespace clusterprobe;

namespace {

bool all_finite(const MatrixD& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double kl_at(const TsneResult& r, std::size_t iteration) {
  for (const auto& c : r.kl_trace) {
    if (c.iteration == iteration) return c.kl;
  }
  FAIL("no checkpoint at iteration " << iteration);
  return 0;
}

MatrixD synthetic_points(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.clusters = 40;
  cfg.fakes_per_cluster = 4;
  cfg.dim = 32;
  cfg.seed = seed;
  const auto d = generate_synthetic(cfg);
  return d.images().cast<double>();
}

}  // namespace

TEST_CASE("tetrahedron gives four finite points") {
  MatrixD x(4, 3, std::vector<double>{1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1});
  TsneConfig cfg;
  cfg.perplexity = 2.0;
  const auto r = tsne_embed(x, cfg);
  CHECK(r.coordinates.rows() == 4);
  CHECK(r.coordinates.cols() == 2);
  CHECK(all_finite(r.coordinates));
}

TEST_CASE("affinities are symmetric, normalized and match the perplexity") {
  Rng rng(1);
  MatrixD x(50, 5);
  for (auto& v : x.values()) v = rng.normal();
  const MatrixD p = tsne_affinities(x, 10.0);
  double total = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(p(i, i) == 0.0);
    for (std::size_t j = 0; j < 50; ++j) {
      CHECK(p(i, j) == p(j, i));
      total += p(i, j);
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(tsne_affinities(x, 10.0, kernels::Backend::kSerial) == p);
}

TEST_CASE("translating the input leaves affinities bit-identical") {
  Rng rng(2);
  MatrixD x(30, 4);
  for (auto& v : x.values()) v = static_cast<double>(static_cast<int>(rng.uniform_index(17)) - 8);
  MatrixD shifted = x;
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t k = 0; k < 4; ++k) shifted(i, k) += static_cast<double>(k * 3 + 5);
  CHECK(tsne_affinities(x, 5.0) == tsne_affinities(shifted, 5.0));
}

// Counted per (row, run). Runs where every pair survives are reported too;
// with learning rate 200 at this size a few runs strand one copy of a pair.
TEST_CASE("duplicated rows stay mutual nearest neighbours") {
  constexpr std::size_t kRuns = 20;
  constexpr std::size_t kHalf = 25;
  std::size_t kept = 0;
  std::size_t clean_runs = 0;
  for (std::uint64_t seed = 0; seed < kRuns; ++seed) {
    Rng rng(seed, 0xd0);
    MatrixD x(2 * kHalf, 8);
    for (std::size_t i = 0; i < kHalf; ++i) {
      for (std::size_t k = 0; k < 8; ++k) x(i, k) = x(i + kHalf, k) = rng.normal();
    }
    TsneConfig cfg;
    cfg.perplexity = 10.0;
    cfg.seed = seed;
    const auto y = tsne_embed(x, cfg).coordinates;
    auto nearest = [&](std::size_t i) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t j = 0; j < y.rows(); ++j) {
        if (j == i) continue;
        const double d = std::hypot(y(i, 0) - y(j, 0), y(i, 1) - y(j, 1));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      return best;
    };
    std::size_t run_kept = 0;
    for (std::size_t i = 0; i < 2 * kHalf; ++i) run_kept += nearest(i) == (i + kHalf) % (2 * kHalf);
    kept += run_kept;
    clean_runs += run_kept == 2 * kHalf;
  }
  const double rate = double(kept) / double(kRuns * 2 * kHalf);
  MESSAGE("twin kept as nearest: " << rate << ", runs with every pair intact: " << clean_runs << "/" << kRuns);
  CHECK(rate >= 0.9);
}

TEST_CASE("KL decreases after exaggeration and the trace is finite") {
  const MatrixD x = synthetic_points(0);
  REQUIRE(x.rows() == 200);
  const auto r = tsne_embed(x, TsneConfig{});
  CHECK(kl_at(r, 1000) < kl_at(r, 300));
  CHECK(r.kl_trace.front().iteration == 50);
  CHECK(r.kl_trace.back().iteration == 1000);
  for (const auto& c : r.kl_trace) CHECK(std::isfinite(c.kl));
  CHECK(all_finite(r.coordinates));
  CHECK(tsne_kl_divergence(tsne_affinities(x, 30.0), r.coordinates) ==
        doctest::Approx(kl_at(r, 1000)).epsilon(1e-9));
}

TEST_CASE("embedding is deterministic and backend-independent") {
  const MatrixD x = synthetic_points(1);
  TsneConfig cfg;
  cfg.iterations = 300;
  cfg.seed = 9;
  const auto a = tsne_embed(x, cfg, kernels::Backend::kParallel);
  const auto b = tsne_embed(x, cfg, kernels::Backend::kSerial);
  CHECK(a.coordinates == b.coordinates);
  CHECK(tsne_embed(x, cfg).coordinates == a.coordinates);
}

TEST_CASE("invalid inputs are rejected") {
  MatrixD small(3, 2, 1.0);
  CHECK_THROWS_AS(tsne_embed(small, TsneConfig{}), Error);
  MatrixD x(10, 2);
  for (std::size_t i = 0; i < 10; ++i) x(i, 0) = double(i);
  TsneConfig cfg;
  cfg.perplexity = 9.0;
  CHECK_THROWS_AS(tsne_embed(x, cfg), Error);
  cfg.perplexity = 3.0;
  cfg.iterations = 0;
  CHECK_THROWS_AS(tsne_embed(x, cfg), Error);
  x(2, 1) = NAN;
  CHECK_THROWS_AS(tsne_affinities(x, 3.0), Error);
  CHECK_THROWS_AS(tsne_affinities(MatrixD(5001, 2), 30.0), Error);
}
