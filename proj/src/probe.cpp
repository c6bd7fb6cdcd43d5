#include "clusterprobe/probe.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <string>

#include "clusterprobe/binary_io.hpp"

namespace clusterprobe {

namespace {

constexpr std::array<char, 5> kProbeMagic = {'C', 'P', 'P', 'B', '1'};

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

const LinearHead& head_for(FeatureSpace space, const HeadPair* heads) {
  if (heads == nullptr) {
    throw Error("probe", "space " + std::string(space_name(space)) +
                             " requires a trained model");
  }
  return space == FeatureSpace::kStyle ? heads->style : heads->semantics;
}

MatrixD in_space(MatrixD rows, FeatureSpace space, const HeadPair* heads) {
  if (space == FeatureSpace::kRaw) return rows;
  return project(head_for(space, heads).weights.cast<double>(), rows);
}

}  // namespace

std::string_view space_name(FeatureSpace space) {
  switch (space) {
    case FeatureSpace::kRaw: return "raw";
    case FeatureSpace::kSemantics: return "s";
    case FeatureSpace::kStyle: return "t";
  }
  return "unknown";
}

FeatureSpace parse_space(std::string_view name) {
  if (name == "raw") return FeatureSpace::kRaw;
  if (name == "s" || name == "S") return FeatureSpace::kSemantics;
  if (name == "t" || name == "T") return FeatureSpace::kStyle;
  throw Error("probe", "unknown feature space \"" + std::string(name) + "\"");
}

MatrixD space_features(const EmbeddingDataset& dataset,
                       std::span<const std::size_t> rows, FeatureSpace space,
                       const HeadPair* heads) {
  return in_space(gather_image_rows(dataset, rows), space, heads);
}

MatrixD space_text_features(const EmbeddingDataset& dataset,
                            std::span<const std::size_t> rows,
                            FeatureSpace space, const HeadPair* heads) {
  return in_space(gather_text_rows(dataset, rows), space, heads);
}

double logistic_objective(const MatrixD& x, std::span<const int> labels,
                          double lambda, std::span<const double> params,
                          std::span<double> gradient) {
  const std::size_t d = x.cols();
  const std::size_t n = x.rows();
  const auto w = params.first(d);
  const double b = params[d];
  const bool want_grad = !gradient.empty();
  if (want_grad) std::fill(gradient.begin(), gradient.end(), 0.0);

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    const double sign = labels[i] == 1 ? 1.0 : -1.0;
    const double margin = sign * (dot(w, xi) + b);
    loss += softplus_neg(margin);
    if (want_grad) {
      const double coeff = -sign * sigmoid_neg(margin);
      for (std::size_t k = 0; k < d; ++k) gradient[k] += coeff * xi[k];
      gradient[d] += coeff;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double objective = loss * inv_n + 0.5 * lambda * dot(w, w);
  if (want_grad) {
    for (std::size_t k = 0; k < d; ++k) gradient[k] = gradient[k] * inv_n + lambda * w[k];
    gradient[d] *= inv_n;
  }
  return objective;
}

LogisticFit fit_logistic(const MatrixD& x, std::span<const int> labels,
                         double lambda, const SolverOptions& options) {
  if (x.rows() == 0) throw Error("probe", "no training rows");
  if (labels.size() != x.rows()) throw Error("probe", "label count differs from row count");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error("probe", "lambda must be finite and non-negative");
  }
  const std::size_t p = x.cols() + 1;
  std::vector<double> params(p, 0.0);
  std::vector<double> grad(p);
  double f = logistic_objective(x, labels, lambda, params, grad);

  struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> direction(p);
  std::vector<double> trial(p);
  std::vector<double> trial_grad(p);
  std::vector<double> alpha(options.history);

  LogisticFit fit;
  for (std::size_t it = 0;; ++it) {
    const double gnorm = norm(grad);
    if (gnorm <= options.gradient_tolerance) {
      fit.iterations = it;
      fit.gradient_norm = gnorm;
      break;
    }
    if (it >= options.max_iterations) {
      throw ProbeError("no convergence after " + std::to_string(it) +
                           " iterations; gradient norm " + std::to_string(gnorm),
                       gnorm);
    }

    // Two-loop recursion.
    for (std::size_t k = 0; k < p; ++k) direction[k] = -grad[k];
    for (std::size_t m = memory.size(); m-- > 0;) {
      alpha[m] = memory[m].rho * dot(memory[m].s, direction);
      for (std::size_t k = 0; k < p; ++k) direction[k] -= alpha[m] * memory[m].y[k];
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : direction) v *= gamma;
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const double beta = memory[m].rho * dot(memory[m].y, direction);
      for (std::size_t k = 0; k < p; ++k) direction[k] += (alpha[m] - beta) * memory[m].s[k];
    }
    double slope = dot(grad, direction);
    if (!(slope < 0.0)) {
      memory.clear();
      for (std::size_t k = 0; k < p; ++k) direction[k] = -grad[k];
      slope = -gnorm * gnorm;
    }

    double step = memory.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
    double f_trial = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t k = 0; k < p; ++k) trial[k] = params[k] + step * direction[k];
      f_trial = logistic_objective(x, labels, lambda, trial, trial_grad);
      if (f_trial <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      throw ProbeError("line search stalled at iteration " + std::to_string(it) +
                           "; gradient norm " + std::to_string(gnorm),
                       gnorm);
    }

    Pair pair{std::vector<double>(p), std::vector<double>(p), 0.0};
    for (std::size_t k = 0; k < p; ++k) {
      pair.s[k] = trial[k] - params[k];
      pair.y[k] = trial_grad[k] - grad[k];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-12 * norm(pair.s) * norm(pair.y)) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > options.history) memory.pop_front();
    }
    params.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
  }
  fit.params = std::move(params);
  fit.objective = f;
  return fit;
}

ProbeModel fit_probe(const EmbeddingDataset& dataset, FeatureSpace space,
                     const HeadPair* heads, double lambda, std::uint64_t seed,
                     const SolverOptions& options) {
  if (dataset.clusters(Split::kTrain).empty()) {
    throw Error("probe", "train split is empty");
  }
  const auto sample = balanced_sample(dataset, Split::kTrain, seed);
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const auto& item : sample) {
    rows.push_back(item.image_row);
    labels.push_back(item.label == Authenticity::kFake ? 1 : 0);
  }
  const MatrixD x = space_features(dataset, rows, space, heads);
  const LogisticFit fit = fit_logistic(x, labels, lambda, options);

  ProbeModel model;
  model.space = space;
  model.lambda = lambda;
  model.weights.resize(x.cols());
  for (std::size_t k = 0; k < x.cols(); ++k) {
    model.weights[k] = static_cast<float>(fit.params[k]);
  }
  model.bias = static_cast<float>(fit.params[x.cols()]);
  return model;
}

ProbeModel sweep_probe(const EmbeddingDataset& dataset, FeatureSpace space,
                       const HeadPair* heads, std::uint64_t seed,
                       const SolverOptions& options) {
  const auto members = split_members(dataset, Split::kValidation);
  if (members.empty()) throw Error("probe", "lambda sweep needs a validation split");
  std::vector<std::size_t> rows;
  for (const auto& m : members) rows.push_back(m.image_row);
  const MatrixD validation = space_features(dataset, rows, space, heads);

  std::optional<ProbeModel> best;
  std::size_t best_correct = 0;
  for (int exponent = -6; exponent <= 2; ++exponent) {
    const double lambda = std::pow(10.0, exponent);
    ProbeModel model = fit_probe(dataset, space, heads, lambda, seed, options);
    const auto predictions = predict(model, validation);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      correct += predictions[i].label == members[i].label ? 1 : 0;
    }
    if (!best || correct > best_correct) {
      best = std::move(model);
      best_correct = correct;
    }
  }
  return *best;
}

std::vector<Prediction> predict(const ProbeModel& model, const MatrixD& features) {
  if (features.cols() != model.weights.size()) {
    throw Error("probe", "probe expects dim " + std::to_string(model.weights.size()) +
                             " but features have dim " + std::to_string(features.cols()));
  }
  std::vector<Prediction> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto xi = features.row(i);
    double score = static_cast<double>(model.bias);
    for (std::size_t k = 0; k < xi.size(); ++k) {
      score += static_cast<double>(model.weights[k]) * xi[k];
    }
    out[i] = {score > 0.0 ? Authenticity::kFake : Authenticity::kReal, score};
  }
  return out;
}

void save_probe(const ProbeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("probe", "cannot write " + path.string());
  out.write(kProbeMagic.data(), kProbeMagic.size());
  io::write_u32_le(out, static_cast<std::uint32_t>(model.weights.size()));
  io::write_f32_le(out, model.weights);
  io::write_f32_le(out, std::span<const float>(&model.bias, 1));
  const char tag = static_cast<char>(model.space);
  out.write(&tag, 1);
  if (!out) throw Error("probe", "write failed for " + path.string());
}

ProbeModel load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("probe", "cannot open probe " + path.string());
  std::array<char, 5> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kProbeMagic) {
    throw Error("probe", path.string() + " is not a CPPB1 probe file");
  }
  ProbeModel model;
  const std::uint32_t dim = io::read_u32_le(in);
  if (dim == 0) throw Error("probe", "probe dimension is zero");
  model.weights.resize(dim);
  io::read_f32_le(in, model.weights);
  io::read_f32_le(in, std::span<float>(&model.bias, 1));
  char tag = 0;
  in.read(&tag, 1);
  if (!in || tag < 0 || tag > 2) throw Error("probe", "bad space tag in " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("probe", path.string() + " has trailing bytes");
  }
  model.space = static_cast<FeatureSpace>(tag);
  return model;
}

}  // namespace clusterprobe
