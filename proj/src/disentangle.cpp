#include "clusterprobe/disentangle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "clusterprobe/binary_io.hpp"
#include "clusterprobe/kernels.hpp"
#include "clusterprobe/random.hpp"
#include "clusterprobe/supcon.hpp"

namespace clusterprobe {

namespace {

constexpr std::array<char, 5> kModelMagic = {'C', 'P', 'R', 'J', '1'};

[[noreturn]] void fail(const std::string& msg) { throw Error("disentangle", msg); }

// Rows of z = x w^T renormalized; returns the pre-normalization norms.
std::vector<double> normalized_projection(const MatrixD& weights,
                                          const MatrixD& features, MatrixD& out) {
  if (weights.rows() != weights.cols() || weights.cols() != features.cols()) {
    fail("head is " + std::to_string(weights.rows()) + "x" +
         std::to_string(weights.cols()) + " but features have dim " +
         std::to_string(features.cols()));
  }
  kernels::multiply_abt(features, weights, out);
  std::vector<double> norms(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double n = std::sqrt(sq);
    if (!(n >= kMinRowNorm)) {
      fail("projected row " + std::to_string(i) + " is degenerate (norm " +
           std::to_string(n) + ")");
    }
    for (double& v : row) v /= n;
    norms[i] = n;
  }
  return norms;
}

}  // namespace

void validate(const TrainConfig& c, std::size_t min_cluster_size) {
  if (c.epochs < 1) fail("epochs must be at least 1");
  if (!(c.learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0)) {
    fail("beta1 and beta2 must lie in (0, 1)");
  }
  if (!(c.epsilon > 0.0)) fail("epsilon must be positive");
  if (!(c.weight_decay >= 0.0)) fail("weight decay must be non-negative");
  if (!(c.temperature > 0.0)) fail("temperature must be positive");
  if (c.batch_size < 2 * min_cluster_size) {
    fail("batch size " + std::to_string(c.batch_size) +
         " cannot hold two clusters of size " + std::to_string(min_cluster_size));
  }
}

void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    fail("adamw_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= config.learning_rate *
                 (m_hat / (std::sqrt(v_hat) + config.epsilon) +
                  config.weight_decay * params[i]);
  }
}

std::vector<TrainingBatch> sample_batches(const EmbeddingDataset& dataset,
                                          Split split, std::size_t batch_size,
                                          std::uint64_t seed,
                                          std::uint64_t epoch) {
  const auto clusters = dataset.clusters(split);
  if (clusters.empty()) {
    fail("split " + std::string(split_name(split)) + " has no clusters");
  }
  std::size_t largest = 0;
  for (const auto& c : clusters) largest = std::max(largest, c.member_count());
  if (batch_size < largest) {
    fail("batch size " + std::to_string(batch_size) +
         " is smaller than a cluster of " + std::to_string(largest));
  }

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x6a7c000000000000ULL + epoch);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<TrainingBatch> batches;
  TrainingBatch current;
  for (std::size_t index : order) {
    const auto& c = clusters[index];
    if (current.rows.size() + c.member_count() > batch_size) {
      batches.push_back(std::move(current));
      current = TrainingBatch{};
    }
    const int label = static_cast<int>(index);
    current.rows.push_back(c.real_row);
    current.cluster_labels.push_back(label);
    current.authenticity_labels.push_back(0);
    for (std::size_t r : c.fake_rows) {
      current.rows.push_back(r);
      current.cluster_labels.push_back(label);
      current.authenticity_labels.push_back(1);
    }
    ++current.cluster_count;
  }
  if (current.cluster_count >= 2) batches.push_back(std::move(current));
  return batches;
}

MatrixD project(const MatrixD& weights, const MatrixD& features) {
  MatrixD out;
  normalized_projection(weights, features, out);
  return out;
}

MatrixF project(const LinearHead& head, const MatrixF& features) {
  return project(head.weights.cast<double>(), features.cast<double>())
      .cast<float>();
}

ObjectiveEvaluation evaluate_head(const MatrixD& weights, HeadKind kind,
                                  const MatrixD& features,
                                  std::span<const int> cluster_labels,
                                  std::span<const int> authenticity_labels,
                                  double temperature) {
  MatrixD projected;
  const auto norms = normalized_projection(weights, features, projected);
  const auto cluster = supcon_loss_and_grad(projected, cluster_labels, temperature);
  const auto real_fake =
      supcon_loss_and_grad(projected, authenticity_labels, temperature);

  ObjectiveEvaluation eval;
  eval.terms = {cluster.loss, real_fake.loss};
  const bool style = kind == HeadKind::kStyle;
  eval.loss = style ? eval.terms.l_t() : eval.terms.l_s();

  // Chain through f = z / |z|: dz = (g - f (f.g)) / |z|.
  const double sign = style ? 1.0 : -1.0;
  MatrixD grad_z(projected.rows(), projected.cols());
  for (std::size_t i = 0; i < projected.rows(); ++i) {
    const auto f = projected.row(i);
    auto gz = grad_z.row(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      gz[k] = sign * (real_fake.gradient(i, k) - cluster.gradient(i, k));
      dot += f[k] * gz[k];
    }
    for (std::size_t k = 0; k < f.size(); ++k) {
      gz[k] = (gz[k] - f[k] * dot) / norms[i];
    }
  }
  kernels::multiply_atb(grad_z, features, eval.gradient);
  return eval;
}

HeadPair initial_heads(std::size_t dim, std::uint64_t seed) {
  auto make = [&](HeadKind kind, std::uint64_t stream) {
    Rng rng(seed, stream);
    LinearHead head{MatrixF::identity(dim), kind};
    for (float& w : head.weights.values()) {
      w = static_cast<float>(static_cast<double>(w) + rng.uniform(-0.01, 0.01));
    }
    return head;
  };
  return {make(HeadKind::kStyle, 0x7e57), make(HeadKind::kSemantics, 0x5e3a)};
}

TrainResult train_disentangle(const EmbeddingDataset& dataset,
                              const TrainConfig& config) {
  if (!dataset.normalized()) fail("training requires a normalized dataset");
  const auto train = dataset.clusters(Split::kTrain);
  if (train.empty()) fail("train split is empty");
  std::size_t smallest = train.front().member_count();
  for (const auto& c : train) smallest = std::min(smallest, c.member_count());
  validate(config, smallest);

  const std::size_t dim = dataset.dim();
  const HeadPair init = initial_heads(dim, config.seed);
  MatrixD style = init.style.weights.cast<double>();
  MatrixD semantics = init.semantics.weights.cast<double>();
  AdamState style_state(style.size());
  AdamState semantics_state(semantics.size());

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches =
        sample_batches(dataset, Split::kTrain, config.batch_size, config.seed, epoch);
    if (batches.empty()) fail("epoch " + std::to_string(epoch) + " produced no batches");

    EpochRecord record;
    record.epoch = epoch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      const MatrixD x = gather_image_rows(dataset, batch.rows);
      auto t_eval = evaluate_head(style, HeadKind::kStyle, x, batch.cluster_labels,
                                  batch.authenticity_labels, config.temperature);
      auto s_eval = evaluate_head(semantics, HeadKind::kSemantics, x,
                                  batch.cluster_labels, batch.authenticity_labels,
                                  config.temperature);

      const double bound = supcon_upper_bound(batch.rows.size(), config.temperature);
      for (double loss : {t_eval.loss, s_eval.loss}) {
        if (!std::isfinite(loss)) {
          fail("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
               std::to_string(b));
        }
        if (std::abs(loss) > bound) {
          fail("loss " + std::to_string(loss) + " exceeds the contrastive bound at epoch " +
               std::to_string(epoch) + ", batch " + std::to_string(b));
        }
      }

      adamw_step(style.values(), t_eval.gradient.values(), style_state, config);
      adamw_step(semantics.values(), s_eval.gradient.values(), semantics_state, config);

      record.mean_l_t += t_eval.loss;
      record.mean_l_s += s_eval.loss;
      record.style_terms.l_cluster += t_eval.terms.l_cluster;
      record.style_terms.l_real_fake += t_eval.terms.l_real_fake;
      record.semantics_terms.l_cluster += s_eval.terms.l_cluster;
      record.semantics_terms.l_real_fake += s_eval.terms.l_real_fake;
    }
    const double n = static_cast<double>(batches.size());
    record.mean_l_t /= n;
    record.mean_l_s /= n;
    record.style_terms.l_cluster /= n;
    record.style_terms.l_real_fake /= n;
    record.semantics_terms.l_cluster /= n;
    record.semantics_terms.l_real_fake /= n;
    result.history.epochs.push_back(record);
  }

  for (const MatrixD* w : {&style, &semantics}) {
    for (double v : w->values()) {
      if (!std::isfinite(v)) fail("trained weights are not finite");
    }
  }
  result.heads.style = {style.cast<float>(), HeadKind::kStyle};
  result.heads.semantics = {semantics.cast<float>(), HeadKind::kSemantics};
  return result;
}

void save_heads(const HeadPair& heads, const std::filesystem::path& path) {
  const std::size_t dim = heads.style.weights.rows();
  if (heads.style.weights.cols() != dim || heads.semantics.weights.rows() != dim ||
      heads.semantics.weights.cols() != dim) {
    fail("heads must be square and of equal size");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write " + path.string());
  out.write(kModelMagic.data(), kModelMagic.size());
  io::write_u32_le(out, static_cast<std::uint32_t>(dim));
  io::write_f32_le(out, heads.style.weights.values());
  io::write_f32_le(out, heads.semantics.weights.values());
  if (!out) fail("write failed for " + path.string());
}

HeadPair load_heads(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open model " + path.string());
  std::array<char, 5> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kModelMagic) fail(path.string() + " is not a CPRJ1 model file");
  const std::uint32_t dim = io::read_u32_le(in);
  if (dim == 0) fail("model dimension is zero");
  HeadPair heads{{MatrixF(dim, dim), HeadKind::kStyle},
                 {MatrixF(dim, dim), HeadKind::kSemantics}};
  io::read_f32_le(in, heads.style.weights.values());
  io::read_f32_le(in, heads.semantics.weights.values());
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(path.string() + " has trailing bytes");
  }
  for (float v : heads.style.weights.values()) {
    if (!std::isfinite(v)) fail("model contains non-finite weights");
  }
  for (float v : heads.semantics.weights.values()) {
    if (!std::isfinite(v)) fail("model contains non-finite weights");
  }
  return heads;
}

}  // namespace clusterprobe
