#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "clusterprobe/dataset.hpp"
#include "clusterprobe/disentangle.hpp"
#include "clusterprobe/error.hpp"
#include "clusterprobe/matrix.hpp"

namespace clusterprobe {

inline constexpr double kDefaultProbeLambda = 1e-4;

enum class FeatureSpace : std::uint8_t { kRaw = 0, kSemantics = 1, kStyle = 2 };

std::string_view space_name(FeatureSpace space);  // "raw", "s", "t"
FeatureSpace parse_space(std::string_view name);

// Features of the given image rows in a space. Raw rows are returned as
// stored; S and T rows are projected through the head and renormalized.
MatrixD space_features(const EmbeddingDataset& dataset,
                       std::span<const std::size_t> rows, FeatureSpace space,
                       const HeadPair* heads);
MatrixD space_text_features(const EmbeddingDataset& dataset,
                            std::span<const std::size_t> rows,
                            FeatureSpace space, const HeadPair* heads);

struct ProbeModel {
  std::vector<float> weights;
  float bias = 0.0f;
  FeatureSpace space = FeatureSpace::kRaw;
  double lambda = kDefaultProbeLambda;
};

struct SolverOptions {
  double gradient_tolerance = 1e-6;
  std::size_t max_iterations = 5000;
  std::size_t history = 10;
};

class ProbeError : public Error {
 public:
  ProbeError(const std::string& message, double gradient_norm)
      : Error("probe", message), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

// Regularized logistic objective over rows x_i with labels y_i in {0, 1}:
//   mean_i log(1 + exp(-s_i (w.x_i + b))) + lambda/2 |w|^2,  s_i = 2 y_i - 1
// params holds w followed by b. gradient, when non-empty, receives the full
// gradient in the same layout.
double logistic_objective(const MatrixD& x, std::span<const int> labels,
                          double lambda, std::span<const double> params,
                          std::span<double> gradient);

struct LogisticFit {
  std::vector<double> params;  // weights then bias
  double objective = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

// L-BFGS from the origin with a backtracking Armijo line search. Throws
// ProbeError when the gradient norm is still above tolerance at the cap.
LogisticFit fit_logistic(const MatrixD& x, std::span<const int> labels,
                         double lambda, const SolverOptions& options = {});

// Probe on a balanced sample (real + one random fake per cluster) of the
// train split.
ProbeModel fit_probe(const EmbeddingDataset& dataset, FeatureSpace space,
                     const HeadPair* heads, double lambda, std::uint64_t seed,
                     const SolverOptions& options = {});

// Fits one probe per lambda in {1e-6, ..., 1e2} and keeps the one with the
// best overall accuracy on the validation split (ties go to the smaller
// lambda).
ProbeModel sweep_probe(const EmbeddingDataset& dataset, FeatureSpace space,
                       const HeadPair* heads, std::uint64_t seed,
                       const SolverOptions& options = {});

struct Prediction {
  Authenticity label;
  double score;
};

// score = w.x + b; fake iff score > 0.
std::vector<Prediction> predict(const ProbeModel& model, const MatrixD& features);

// Probe file: "CPPB1", u32 LE dim, dim + 1 f32 LE (weights, bias), u8 space.
void save_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

}  // namespace clusterprobe
