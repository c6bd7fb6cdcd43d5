#include "clusterprobe/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "clusterprobe/error.hpp"
#include "clusterprobe/random.hpp"

namespace clusterprobe {

namespace {

constexpr double kEntropyTolerance = 1e-5;
constexpr int kMaxBisections = 200;
constexpr double kMinGain = 0.01;
constexpr double kProbabilityFloor = 1e-12;

[[noreturn]] void fail(const std::string& msg) { throw Error("tsne", msg); }

// Conditional p_{j|i} for one row at precision beta; returns the entropy.
double row_conditional(std::span<const double> sq_dist, std::size_t i,
                       double beta, std::span<double> out) {
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sq_dist.size(); ++j) {
    if (j != i) min_d = std::min(min_d, sq_dist[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < sq_dist.size(); ++j) {
    out[j] = j == i ? 0.0 : std::exp(-beta * (sq_dist[j] - min_d));
    sum += out[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < sq_dist.size(); ++j) {
    out[j] /= sum;
    weighted += out[j] * (sq_dist[j] - min_d);
  }
  // H = log(sum) + beta * E[d - min_d]
  return std::log(sum) + beta * weighted;
}

void fit_row(const MatrixD& sq_dist, std::size_t i, double target_entropy,
             MatrixD& conditional) {
  const auto d = sq_dist.row(i);
  auto out = conditional.row(i);
  double beta = 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int step = 0; step < kMaxBisections; ++step) {
    const double h = row_conditional(d, i, beta, out);
    const double diff = h - target_entropy;
    if (std::abs(diff) < kEntropyTolerance) return;
    if (diff > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
}

}  // namespace

MatrixD tsne_affinities(const MatrixD& features, double perplexity,
                        kernels::Backend backend) {
  const std::size_t n = features.rows();
  if (n < 4) fail("need at least 4 points");
  if (n > kTsneMaxPoints) {
    fail(std::to_string(n) + " points exceed the exact t-SNE limit of " +
         std::to_string(kTsneMaxPoints) + "; subsample first");
  }
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n - 1)) {
    fail("perplexity must lie in (0, n - 1)");
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) fail("non-finite input feature");
  }

  MatrixD sq_dist;
  kernels::squared_distances(features, sq_dist, backend);
  MatrixD conditional(n, n);
  const double target = std::log(perplexity);
  const auto rows = static_cast<std::ptrdiff_t>(n);
  if (backend == kernels::Backend::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      fit_row(sq_dist, static_cast<std::size_t>(i), target, conditional);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      fit_row(sq_dist, static_cast<std::size_t>(i), target, conditional);
    }
  }

  MatrixD p(n, n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = std::max((conditional(i, j) + conditional(j, i)) * scale,
                         i == j ? 0.0 : kProbabilityFloor);
    }
  }
  return p;
}

double tsne_kl_divergence(const MatrixD& p, const MatrixD& y) {
  const std::size_t n = y.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      z += 1.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      const double q = std::max(1.0 / (1.0 + dx * dx + dy * dy) / z, kProbabilityFloor);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

TsneResult tsne_embed(const MatrixD& features, const TsneConfig& config,
                      kernels::Backend backend) {
  if (config.iterations < 1) fail("iterations must be at least 1");
  const MatrixD p = tsne_affinities(features, config.perplexity, backend);
  const std::size_t n = features.rows();

  Rng rng(config.seed, 0x75e0);
  TsneResult result;
  MatrixD& y = result.coordinates;
  y.resize(n, 2);
  for (double& v : y.values()) v = 1e-4 * rng.normal();

  MatrixD velocity(n, 2);
  MatrixD gains(n, 2, 1.0);
  MatrixD grad;
  std::vector<double> row_sums(n);

  auto record = [&](std::size_t done) {
    const double kl = tsne_kl_divergence(p, y);
    if (!std::isfinite(kl)) fail("non-finite KL divergence at iteration " + std::to_string(done));
    result.kl_trace.push_back({done, kl});
  };

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double exaggeration =
        it < config.exaggeration_iterations ? config.exaggeration : 1.0;
    const double momentum =
        it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    kernels::tsne_gradient(p, y, exaggeration, grad, row_sums, backend);

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        const double g = grad(i, c);
        double& gain = gains(i, c);
        double& vel = velocity(i, c);
        gain = (g > 0.0) != (vel > 0.0) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, kMinGain);
        vel = momentum * vel - config.learning_rate * gain * g;
        y(i, c) += vel;
      }
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
    for (double v : y.values()) {
      if (!std::isfinite(v)) fail("non-finite coordinate at iteration " + std::to_string(it + 1));
    }

    const std::size_t done = it + 1;
    if ((config.kl_interval > 0 && done % config.kl_interval == 0) ||
        done == config.iterations) {
      if (result.kl_trace.empty() || result.kl_trace.back().iteration != done) record(done);
    }
  }
  return result;
}

}  // namespace clusterprobe
