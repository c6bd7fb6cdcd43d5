#pragma once

// Test-only brute-force reimplementations. They deliberately share no code
// with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterprobe/dataset.hpp"
#include "clusterprobe/matrix.hpp"
#include "clusterprobe/random.hpp"

namespace oracle {

using clusterprobe::Authenticity;
using clusterprobe::EmbeddingDataset;
using clusterprobe::MatrixD;
using clusterprobe::Split;

// Direct evaluation of the summed supervised contrastive loss in long double,
// no max shift.
inline double supcon(const MatrixD& f, const std::vector<int>& labels, double tau) {
  const std::size_t n = f.rows();
  auto sim = [&](std::size_t i, std::size_t j) {
    long double s = 0;
    for (std::size_t k = 0; k < f.cols(); ++k) s += (long double)f(i, k) * f(j, k);
    return s / tau;
  };
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) pos.push_back(p);
    }
    if (pos.empty()) continue;
    long double denom = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a));
    }
    long double acc = 0;
    for (std::size_t p : pos) acc += std::log(std::exp(sim(i, p)) / denom);
    total += -acc / (long double)pos.size();
  }
  return (double)total;
}

// Central differences of fn over every entry of x.
inline MatrixD central_differences(MatrixD x, const std::function<double(const MatrixD&)>& fn,
                                   double h) {
  MatrixD g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.values()[i];
    x.values()[i] = saved + h;
    const double up = fn(x);
    x.values()[i] = saved - h;
    const double down = fn(x);
    x.values()[i] = saved;
    g.values()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_relative_error(const MatrixD& a, const MatrixD& b, double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a.values()[i]), std::abs(b.values()[i]), floor});
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]) / denom);
  }
  return worst;
}

inline MatrixD random_unit_rows(clusterprobe::Rng& rng, std::size_t n, std::size_t d) {
  MatrixD m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (auto& v : m.row(i)) {
      v = rng.normal();
      sq += v * v;
    }
    for (auto& v : m.row(i)) v /= std::sqrt(sq);
  }
  return m;
}

inline double dot(const float* a, const float* b, std::size_t d) {
  double s = 0;
  for (std::size_t k = 0; k < d; ++k) s += (double)a[k] * (double)b[k];
  return s;
}

using Predictions = std::vector<std::optional<Authenticity>>;

inline double overall(const Predictions& p, const EmbeddingDataset& d, Split s) {
  int good = 0, all = 0;
  for (const auto& c : d.clusters(s)) {
    good += *p[c.real_row] == Authenticity::kReal;
    ++all;
    for (auto r : c.fake_rows) {
      good += *p[r] == Authenticity::kFake;
      ++all;
    }
  }
  return (double)good / all;
}

inline double full_cluster(const Predictions& p, const EmbeddingDataset& d, Split s) {
  int good = 0;
  for (const auto& c : d.clusters(s)) {
    int wrong = *p[c.real_row] != Authenticity::kReal;
    for (auto r : c.fake_rows) wrong += *p[r] != Authenticity::kFake;
    good += wrong == 0;
  }
  return (double)good / d.clusters(s).size();
}

// Mean cosine distance of each member to the rest; rates of real being the
// strict min / strict max. Features are read straight from the raw matrix.
inline std::pair<double, double> min_max(const EmbeddingDataset& d, Split s) {
  const auto& m = d.images();
  const std::size_t dim = d.dim();
  int mins = 0, maxs = 0;
  for (const auto& c : d.clusters(s)) {
    std::vector<std::size_t> rows{c.real_row};
    rows.insert(rows.end(), c.fake_rows.begin(), c.fake_rows.end());
    std::vector<double> mean;
    for (auto a : rows) {
      double sum = 0;
      for (auto b : rows) {
        if (a != b) sum += 1.0 - dot(m.row(a).data(), m.row(b).data(), dim);
      }
      mean.push_back(sum / (rows.size() - 1));
    }
    const auto fakes_begin = mean.begin() + 1;
    const double lowest_fake = *std::min_element(fakes_begin, mean.end());
    const double highest_fake = *std::max_element(fakes_begin, mean.end());
    mins += mean[0] < lowest_fake;
    maxs += mean[0] > highest_fake;
  }
  const double k = d.clusters(s).size();
  return {mins / k, maxs / k};
}

// Full sort of the pool per query.
inline void recall(const EmbeddingDataset& d, Split s, const std::vector<std::size_t>& ks,
                   std::vector<double>& exact, std::vector<double>& intra) {
  std::vector<std::size_t> pool;
  for (const auto& c : d.clusters(s)) pool.insert(pool.end(), c.caption_rows.begin(), c.caption_rows.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  std::vector<int> e(ks.size()), in(ks.size());
  int queries = 0;
  for (const auto& c : d.clusters(s)) {
    for (std::size_t i = 0; i < c.fake_rows.size(); ++i) {
      ++queries;
      const float* q = d.images().row(c.fake_rows[i]).data();
      std::vector<std::pair<double, std::size_t>> scored;
      for (auto row : pool) scored.push_back({dot(q, d.texts().row(row).data(), d.dim()), row});
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      for (std::size_t k = 0; k < ks.size(); ++k) {
        bool hit_exact = false, hit_intra = false;
        for (std::size_t r = 0; r < std::min(ks[k], scored.size()); ++r) {
          hit_exact |= scored[r].second == c.caption_rows[i];
          hit_intra |= std::find(c.caption_rows.begin(), c.caption_rows.end(), scored[r].second) !=
                       c.caption_rows.end();
        }
        e[k] += hit_exact;
        in[k] += hit_intra;
      }
    }
  }
  exact.clear();
  intra.clear();
  for (std::size_t k = 0; k < ks.size(); ++k) {
    exact.push_back((double)e[k] / queries);
    intra.push_back((double)in[k] / queries);
  }
}

// Random fixtures shared by the metric tests and the acceptance suite.

inline void fill_unit(clusterprobe::Rng& rng, std::span<float> row) {
  double n2 = 0;
  std::vector<double> v(row.size());
  for (auto& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  for (std::size_t k = 0; k < row.size(); ++k) row[k] = static_cast<float>(v[k] / std::sqrt(n2));
}

// K clusters of N fakes in the validation split, captions 1:1 with fakes,
// random unit rows.
inline EmbeddingDataset random_dataset(clusterprobe::Rng& rng, std::size_t k, std::size_t n, std::size_t dim) {
  clusterprobe::MatrixF images(k * (n + 1), dim), texts(k * n, dim);
  for (std::size_t r = 0; r < images.rows(); ++r) fill_unit(rng, images.row(r));
  for (std::size_t r = 0; r < texts.rows(); ++r) fill_unit(rng, texts.row(r));
  clusterprobe::SplitClusters splits;
  for (std::size_t c = 0; c < k; ++c) {
    clusterprobe::SemanticCluster cl{"c" + std::to_string(c), c * (n + 1), {}, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
      cl.fake_rows.push_back(c * (n + 1) + 1 + i);
      cl.caption_rows.push_back(c * n + i);
    }
    splits[1].push_back(cl);
  }
  return EmbeddingDataset(dim, images, texts, splits, true);
}

inline Predictions random_predictions(clusterprobe::Rng& rng, const EmbeddingDataset& d, double flip) {
  Predictions p(d.images().rows());
  for (const auto& c : d.clusters(Split::kValidation)) {
    p[c.real_row] = rng.uniform() < flip ? Authenticity::kFake : Authenticity::kReal;
    for (auto r : c.fake_rows) p[r] = rng.uniform() < flip ? Authenticity::kReal : Authenticity::kFake;
  }
  return p;
}

}  // namespace oracle
