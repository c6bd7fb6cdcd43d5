#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clusterprobe/dataset.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe {

enum class HeadKind { kStyle, kSemantics };

// Square linear projection without bias. T is the style head, S the
// semantics head.
struct LinearHead {
  MatrixF weights;
  HeadKind kind = HeadKind::kStyle;
  bool operator==(const LinearHead&) const = default;
};

struct HeadPair {
  LinearHead style;
  LinearHead semantics;
  bool operator==(const HeadPair&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 1024;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double temperature = 0.1;
  std::uint64_t seed = 0;
};

// Throws Error("disentangle", ...) on invalid hyperparameters.
void validate(const TrainConfig& config, std::size_t min_cluster_size);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t size = 0)
      : first_moment(size, 0.0), second_moment(size, 0.0) {}
};

// Decoupled weight decay Adam:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamState& state, const TrainConfig& config);

struct TrainingBatch {
  std::vector<std::size_t> rows;
  std::vector<int> cluster_labels;
  std::vector<int> authenticity_labels;  // 0 real, 1 fake
  std::size_t cluster_count = 0;
};

// Whole clusters packed greedily up to batch_size items after a shuffle that
// depends only on (seed, epoch). A trailing batch is kept only if it holds at
// least two clusters.
std::vector<TrainingBatch> sample_batches(const EmbeddingDataset& dataset,
                                          Split split, std::size_t batch_size,
                                          std::uint64_t seed,
                                          std::uint64_t epoch);

// Projects rows through the head and renormalizes them.
MatrixF project(const LinearHead& head, const MatrixF& features);
MatrixD project(const MatrixD& weights, const MatrixD& features);

// Both contrastive terms evaluated on one projection. By construction
// l_t() + l_s() == 0.
struct ObjectiveTerms {
  double l_cluster = 0.0;
  double l_real_fake = 0.0;
  double l_t() const { return l_real_fake - l_cluster; }
  double l_s() const { return l_cluster - l_real_fake; }
};

struct ObjectiveEvaluation {
  ObjectiveTerms terms;
  double loss = 0.0;     // l_t() for the style head, l_s() for semantics
  MatrixD gradient;      // d loss / d weights
};

// Objective of one head on one batch, with the gradient chained through the
// row normalization and the projection.
ObjectiveEvaluation evaluate_head(const MatrixD& weights, HeadKind kind,
                                  const MatrixD& features,
                                  std::span<const int> cluster_labels,
                                  std::span<const int> authenticity_labels,
                                  double temperature);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_l_t = 0.0;  // style head objective
  double mean_l_s = 0.0;  // semantics head objective
  ObjectiveTerms style_terms;      // batch means under T
  ObjectiveTerms semantics_terms;  // batch means under S
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  HeadPair heads;
  TrainHistory history;
};

HeadPair initial_heads(std::size_t dim, std::uint64_t seed);

TrainResult train_disentangle(const EmbeddingDataset& dataset,
                              const TrainConfig& config);

// Model file: "CPRJ1", u32 LE dim, T then S as dim x dim f32 LE row-major.
void save_heads(const HeadPair& heads, const std::filesystem::path& path);
HeadPair load_heads(const std::filesystem::path& path);

}  // namespace clusterprobe
