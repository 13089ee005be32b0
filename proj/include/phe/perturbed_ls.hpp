#pragma once

// Incremental ridge regression and Gaussian perturbation of its solution.
//
// Two samplers produce perturbed weights with the same law
// theta_tilde - theta_hat ~ N(0, sigma^2 Lambda^{-1}):
//   * the direct sampler draws theta_hat + sigma * L z with L L^T = Lambda^{-1};
//   * the reward-perturbation sampler adds N(0, sigma^2) noise to every
//     regression target and N(0, sigma^2 lambda I) noise to the moment
//     vector, then solves.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phe/errors.hpp"
#include "phe/random.hpp"

namespace phe {

inline constexpr int kFactorRefreshInterval = 512;

/// Lambda = lambda I + sum phi phi^T with its inverse maintained by
/// Sherman-Morrison and a Cholesky factor of the inverse refreshed lazily.
class GramState {
 public:
  GramState(int dim, double lambda)
      : lambda_(lambda),
        gram_(Eigen::MatrixXd::Identity(dim, dim) * lambda),
        inverse_(Eigen::MatrixXd::Identity(dim, dim) / lambda) {
    if (dim < 1) throw InputError("gram dimension must be positive");
    if (!(lambda > 0.0)) throw InputError("ridge lambda must be positive");
  }

  void update(const Eigen::Ref<const Eigen::VectorXd>& phi) {
    if (phi.size() != dim())
      throw InputError("feature has dimension " + std::to_string(phi.size()) + ", expected " + std::to_string(dim()));
    if (!(phi.norm() <= 1.0 + 1e-9)) throw InputError("feature norm exceeds 1");

    gram_.noalias() += phi * phi.transpose();
    Eigen::VectorXd u = inverse_ * phi;
    const double denom = 1.0 + phi.dot(u);
    inverse_.noalias() -= (u * u.transpose()) / denom;
    ++count_;

    if (++since_refresh_ >= kFactorRefreshInterval) {
      refresh_from_dense();
    } else if (factor_valid_) {
      pending_.emplace_back(std::move(u), -1.0 / denom);
    }
  }

  int dim() const { return static_cast<int>(gram_.rows()); }
  double lambda() const { return lambda_; }
  int count() const { return count_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  bool factor_stale() const { return !factor_valid_ || !pending_.empty(); }

  /// Lower-triangular L with L L^T = Lambda^{-1}. Not safe to call from
  /// several threads at once: it may refresh the cached factor.
  Eigen::MatrixXd inverse_factor() {
    ensure_factor();
    return factor_.matrixL();
  }

  const Eigen::LLT<Eigen::MatrixXd>& inverse_llt() {
    ensure_factor();
    return factor_;
  }

  /// ||phi||_{Lambda^{-1}}
  double inverse_norm(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
    return std::sqrt(std::max(0.0, phi.dot(inverse_ * phi)));
  }

  void ensure_factor() {
    if (factor_valid_ && pending_.empty()) return;
    if (factor_valid_) {
      for (const auto& [u, weight] : pending_) {
        factor_.rankUpdate(u, weight);
        if (factor_.info() != Eigen::Success) {
          factor_valid_ = false;
          break;
        }
      }
      pending_.clear();
      if (factor_valid_) return;
    }
    dense_factor();
  }

 private:
  void refresh_from_dense() {
    Eigen::LLT<Eigen::MatrixXd> llt(gram_);
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky of the Gram matrix failed");
    inverse_ = llt.solve(Eigen::MatrixXd::Identity(dim(), dim()));
    inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
    since_refresh_ = 0;
    factor_valid_ = false;
    pending_.clear();
  }

  void dense_factor() {
    factor_.compute(inverse_);
    if (factor_.info() != Eigen::Success) throw NumericalError("Cholesky of the inverse Gram matrix failed");
    factor_valid_ = true;
    pending_.clear();
  }

  double lambda_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd inverse_;
  int count_ = 0;
  int since_refresh_ = 0;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  bool factor_valid_ = false;
  std::vector<std::pair<Eigen::VectorXd, double>> pending_;
};

/// Regression features (one column per absorbed sample) and their targets.
struct RegressionTargetSet {
  Eigen::MatrixXd features;  // d x n
  Eigen::VectorXd targets;   // n

  int size() const { return static_cast<int>(targets.size()); }
  Eigen::VectorXd moment() const { return features * targets; }
};

struct WeightVector {
  Eigen::VectorXd theta;
  std::optional<int> perturbation;  // empty for the unperturbed solution
};

inline WeightVector ridge_solve(const GramState& g, const Eigen::Ref<const Eigen::VectorXd>& moment) {
  if (moment.size() != g.dim()) throw InputError("moment vector dimension mismatch");
  return {g.inverse() * moment, std::nullopt};
}

/// Fills an n x m matrix with standard normals, column after column.
inline Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = rng.normal();
  return z;
}

/// d x M matrix whose columns are theta_hat + sigma L z_j.
inline Eigen::MatrixXd perturbed_weight_matrix_direct(GramState& g, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                                                      double sigma, int m, RandomStream& rng) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (m < 1) throw InputError("M must be at least 1");
  if (theta_hat.size() != g.dim()) throw InputError("theta_hat dimension mismatch");
  const Eigen::MatrixXd z = standard_normal_matrix(g.dim(), m, rng);
  Eigen::MatrixXd out = g.inverse_llt().matrixL() * z;
  out *= sigma;
  out.colwise() += theta_hat;
  return out;
}

/// d x M matrix from the literal reward-perturbation route. For every j:
/// n target noises eps ~ N(0, sigma^2), then d prior noises
/// xi ~ N(0, sigma^2 lambda I), then theta_j = Lambda^{-1}(rho + Phi eps + xi).
inline Eigen::MatrixXd perturbed_weight_matrix_via_rewards(const GramState& g, const RegressionTargetSet& data,
                                                           double sigma, int m, RandomStream& rng) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (m < 1) throw InputError("M must be at least 1");
  if (data.features.rows() != g.dim() && data.size() > 0) throw InputError("target features dimension mismatch");
  if (data.size() != g.count()) throw InputError("target set size differs from the Gram sample count");
  const Eigen::Index n = data.size();
  const int d = g.dim();
  const double prior_scale = sigma * std::sqrt(g.lambda());
  Eigen::MatrixXd eps(n, m), xi(d, m);
  for (int j = 0; j < m; ++j) {
    for (Eigen::Index t = 0; t < n; ++t) eps(t, j) = sigma * rng.normal();
    for (int i = 0; i < d; ++i) xi(i, j) = prior_scale * rng.normal();
  }
  Eigen::MatrixXd rhs = xi;
  if (n > 0) {
    rhs.colwise() += data.moment();
    rhs.noalias() += data.features * eps;
  }
  return g.inverse() * rhs;
}

inline std::vector<WeightVector> split_columns(const Eigen::MatrixXd& thetas) {
  std::vector<WeightVector> out;
  out.reserve(static_cast<std::size_t>(thetas.cols()));
  for (Eigen::Index j = 0; j < thetas.cols(); ++j) out.push_back({thetas.col(j), static_cast<int>(j)});
  return out;
}

inline std::vector<WeightVector> sample_perturbed_weights_direct(GramState& g, const WeightVector& theta_hat,
                                                                 double sigma, int m, RandomStream& rng) {
  return split_columns(perturbed_weight_matrix_direct(g, theta_hat.theta, sigma, m, rng));
}

inline std::vector<WeightVector> sample_perturbed_weights_via_rewards(const GramState& g,
                                                                      const RegressionTargetSet& data, double sigma,
                                                                      int m, RandomStream& rng) {
  return split_columns(perturbed_weight_matrix_via_rewards(g, data, sigma, m, rng));
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(phi^T theta_tilde >= phi^T theta_hat + sigma ||phi||_{Lambda^{-1}}) = Phi(-1).
inline double anticoncentration_probability() { return standard_normal_cdf(-1.0); }

/// Probability that the max over m perturbed fits clears the one-sigma margin.
inline double optimism_probability(int m) {
  return 1.0 - std::pow(1.0 - anticoncentration_probability(), m);
}

/// Fraction of trials in which max_j phi^T theta_tilde_j reaches
/// phi^T theta_hat + margin * sigma ||phi||_{Lambda^{-1}}, each trial drawing
/// m weight vectors with the direct sampler.
inline double exceedance_rate(GramState& g, const Eigen::Ref<const Eigen::VectorXd>& theta_hat,
                              const Eigen::Ref<const Eigen::VectorXd>& phi, double sigma, int m, double margin,
                              int n_trials, RandomStream& rng) {
  if (n_trials < 1) throw InputError("n_trials must be positive");
  const double threshold = phi.dot(theta_hat) + margin * sigma * g.inverse_norm(phi);
  constexpr int kBatch = 4096;
  int hits = 0;
  for (int done = 0; done < n_trials;) {
    const int trials = std::min(kBatch / m + 1, n_trials - done);
    const Eigen::MatrixXd thetas = perturbed_weight_matrix_direct(g, theta_hat, sigma, trials * m, rng);
    const Eigen::RowVectorXd values = phi.transpose() * thetas;
    for (int t = 0; t < trials; ++t)
      if (values.segment(static_cast<Eigen::Index>(t) * m, m).maxCoeff() >= threshold) ++hits;
    done += trials;
  }
  return static_cast<double>(hits) / n_trials;
}

/// Monte-Carlo estimate of P(f_theta_tilde(x) >= f_theta_hat(x) + sigma ||phi||_{Lambda^{-1}}).
inline double anticoncentration_rate(GramState& g, const Eigen::Ref<const Eigen::VectorXd>& phi, double sigma,
                                     int n_samples, RandomStream& rng, double margin = 1.0) {
  if (n_samples < 10000) throw InputError("anticoncentration_rate needs at least 1e4 samples");
  const Eigen::VectorXd theta_hat = Eigen::VectorXd::Zero(g.dim());
  return exceedance_rate(g, theta_hat, phi, sigma, 1, margin, n_samples, rng);
}

/// sum_k ||phi_k||^2_{(Lambda^k)^{-1}} where Lambda^k has absorbed phi_1..phi_{k-1}.
inline double elliptic_potential(std::span<const Eigen::VectorXd> stream, int dim, double lambda) {
  GramState g(dim, lambda);
  double total = 0.0;
  for (const auto& phi : stream) {
    const double n = g.inverse_norm(phi);
    total += n * n;
    g.update(phi);
  }
  return total;
}

inline double elliptic_potential_bound(int dim, double lambda, int k) {
  return 2.0 * dim * std::log((lambda + k) / lambda);
}

}  // namespace phe
