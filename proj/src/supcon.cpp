#include "clusterprobe/supcon.hpp"

#include <cmath>
#include <string>

#include "clusterprobe/error.hpp"

namespace clusterprobe {

namespace {

void validate(const MatrixD& features, std::span<const int> labels,
              double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error("supcon", "temperature must be positive and finite");
  }
  if (features.rows() < 2) throw Error("supcon", "batch needs at least two rows");
  if (labels.size() != features.rows()) {
    throw Error("supcon", "label count " + std::to_string(labels.size()) +
                              " differs from batch size " +
                              std::to_string(features.rows()));
  }
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double sq = 0.0;
    for (double v : features.row(i)) {
      if (!std::isfinite(v)) {
        throw Error("supcon", "non-finite feature in row " + std::to_string(i));
      }
      sq += v * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-4) {
      throw Error("supcon", "row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

struct Pass {
  double loss;
  MatrixD coeff;
};

Pass forward(const MatrixD& features, std::span<const int> labels,
             double temperature, kernels::Backend backend) {
  validate(features, labels, temperature);
  MatrixD sim;
  kernels::multiply_abt(features, features, sim, backend);
  const double inv_t = 1.0 / temperature;
  for (double& v : sim.values()) v *= inv_t;
  Pass pass{0.0, {}};
  std::vector<double> terms(features.rows());
  kernels::supcon_rows(sim, labels, pass.coeff, terms, backend);
  for (double t : terms) pass.loss += t;
  return pass;
}

}  // namespace

double supcon_loss(const MatrixD& features, std::span<const int> labels,
                   double temperature, kernels::Backend backend) {
  return forward(features, labels, temperature, backend).loss;
}

SupConResult supcon_loss_and_grad(const MatrixD& features,
                                  std::span<const int> labels,
                                  double temperature,
                                  kernels::Backend backend) {
  Pass pass = forward(features, labels, temperature, backend);
  // d loss / d f_k = (1/t) sum_j (C_kj + C_jk) f_j
  const std::size_t n = features.rows();
  MatrixD sym(n, n);
  const double inv_t = 1.0 / temperature;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sym(i, j) = (pass.coeff(i, j) + pass.coeff(j, i)) * inv_t;
    }
  }
  SupConResult result{pass.loss, {}};
  kernels::multiply_ab(sym, features, result.gradient, backend);
  return result;
}

double supcon_upper_bound(std::size_t batch_size, double temperature) {
  const double b = static_cast<double>(batch_size);
  return b * (std::log(b - 1.0) + 2.0 / temperature);
}

}  // namespace clusterprobe
