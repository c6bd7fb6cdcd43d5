#include "clusterprobe/synth.hpp"

#include <cmath>
#include <string>

#include "clusterprobe/random.hpp"

namespace clusterprobe {

namespace {

void check_config(const SynthConfig& c) {
  if (c.dim < 2) throw Error("synth", "dim must be at least 2");
  if (c.clusters < 3) {
    throw Error("synth", "at least 3 clusters are needed for three nonempty splits");
  }
  if (c.fakes_per_cluster < 1) throw Error("synth", "fakes per cluster must be positive");
  for (double v : {c.style_offset, c.semantic_noise, c.caption_noise}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error("synth", "scales must be finite and non-negative");
    }
  }
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void normalize(std::span<double> v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
}

void gaussian(Rng& rng, std::span<double> out, double scale) {
  for (double& x : out) x = scale * rng.normal();
}

void store_normalized(std::span<const double> v, std::span<float> out) {
  const double n = norm(v);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
}

}  // namespace

SynthResult generate_synthetic_with_truth(const SynthConfig& config) {
  check_config(config);
  const std::size_t k_count = config.clusters;
  const std::size_t n = config.fakes_per_cluster;
  const std::size_t d = config.dim;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));

  Rng rng(config.seed, 0x5e7d);
  std::vector<double> style(d);
  do {
    gaussian(rng, style, 1.0);
  } while (norm(style) < 1e-6);
  normalize(style);

  MatrixD centroids(k_count, d);
  for (std::size_t k = 0; k < k_count; ++k) {
    auto c = centroids.row(k);
    double len = 0.0;
    while (len < 1e-6) {
      gaussian(rng, c, 1.0);
      double along = 0.0;
      for (std::size_t j = 0; j < d; ++j) along += c[j] * style[j];
      for (std::size_t j = 0; j < d; ++j) c[j] -= along * style[j];
      len = norm(c);
    }
    normalize(c);
  }

  MatrixF images(k_count * (n + 1), d);
  MatrixF texts(k_count * n, d);
  std::vector<double> noise(d);
  std::vector<double> work(d);
  SplitClusters splits;

  const auto held_out = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(k_count) / 10.0)));
  const std::size_t train_count = k_count - 2 * held_out;

  for (std::size_t k = 0; k < k_count; ++k) {
    const auto c = centroids.row(k);
    SemanticCluster cluster;
    cluster.cluster_id = "synth-" + std::to_string(k);
    cluster.real_row = k * (n + 1);

    gaussian(rng, noise, config.semantic_noise * unit);
    for (std::size_t j = 0; j < d; ++j) work[j] = c[j] + noise[j];
    store_normalized(work, images.row(cluster.real_row));

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = cluster.real_row + 1 + i;
      gaussian(rng, noise, config.semantic_noise * unit);
      for (std::size_t j = 0; j < d; ++j) {
        work[j] = c[j] + noise[j] + config.style_offset * style[j];
      }
      store_normalized(work, images.row(row));
      cluster.fake_rows.push_back(row);

      const std::size_t text_row = k * n + i;
      gaussian(rng, noise, config.caption_noise * unit);
      for (std::size_t j = 0; j < d; ++j) work[j] = c[j] + noise[j];
      store_normalized(work, texts.row(text_row));
      cluster.caption_rows.push_back(text_row);
    }

    const Split split = k < train_count              ? Split::kTrain
                        : k < train_count + held_out ? Split::kValidation
                                                     : Split::kTest;
    splits[static_cast<std::size_t>(split)].push_back(std::move(cluster));
  }

  return SynthResult{
      EmbeddingDataset(d, std::move(images), std::move(texts), std::move(splits), true),
      std::move(style), std::move(centroids)};
}

EmbeddingDataset generate_synthetic(const SynthConfig& config) {
  return generate_synthetic_with_truth(config).dataset;
}

}  // namespace clusterprobe
