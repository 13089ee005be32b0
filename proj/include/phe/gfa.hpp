#pragma once

// Perturbed least-squares value iteration over a general function class.
//
// A RegressionOracle solves
//   argmin_f  sum_i (f(x_i) - y_i)^2 + lambda * sum_j (p_j(f) + noise_j)^2
// over its class. perturbed_fit supplies the noisy targets and the noisy
// regularizer; plan_gfa_phe runs the backward pass with M fits per step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phe/agents.hpp"
#include "phe/errors.hpp"
#include "phe/features.hpp"
#include "phe/mdp.hpp"
#include "phe/random.hpp"

namespace phe {

struct Sample {
  int state;
  int action;
  double target;
};

struct StateAction {
  int state;
  int action;
};

/// A fitted function over the whole S x A table.
struct FittedFunction {
  Eigen::MatrixXd table;               // S x A
  std::optional<Eigen::VectorXd> theta;  // linear oracles only
  std::optional<int> member;             // finite classes only

  double operator()(int s, int a) const { return table(s, a); }
};

class RegressionOracle {
 public:
  virtual ~RegressionOracle() = default;

  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  /// Number D of regularizer functionals p_j.
  virtual int num_regularizers() const = 0;

  /// Minimizer of the squared loss on data plus lambda * sum_j (p_j(f) + reg_noise_j)^2.
  virtual FittedFunction fit(std::span<const Sample> data, std::span<const double> reg_noise, double lambda) const = 0;

  /// R(f) = sum_j p_j(f)^2 for a function given as an S x A table.
  virtual double regularizer(const Eigen::MatrixXd& table) const = 0;
};

/// Linear class f(s,a) = phi(s,a)^T theta with p_j(theta) = -theta_j, so that
/// R(theta) = ||theta||^2 and the perturbed solution is
/// Lambda^{-1}(sum y_tilde phi + lambda xi'). Solved densely.
class LinearOracle final : public RegressionOracle {
 public:
  explicit LinearOracle(FeatureMap features) : features_(std::move(features)) {}

  int n_states() const override { return features_.n_states(); }
  int n_actions() const override { return features_.n_actions(); }
  int num_regularizers() const override { return features_.dim(); }

  FittedFunction fit(std::span<const Sample> data, std::span<const double> reg_noise, double lambda) const override {
    const int d = features_.dim();
    if (static_cast<int>(reg_noise.size()) != d) throw InputError("linear oracle expects d regularizer noises");
    Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd rhs(d);
    for (int j = 0; j < d; ++j) rhs(j) = lambda * reg_noise[j];
    for (const Sample& x : data) {
      const auto phi = features_.row(x.state, x.action).transpose();
      gram.noalias() += phi * phi.transpose();
      rhs.noalias() += x.target * phi;
    }
    Eigen::VectorXd theta = gram.ldlt().solve(rhs);
    const Eigen::VectorXd flat = features_.table() * theta;
    FittedFunction out;
    out.table = Eigen::Map<const Eigen::MatrixXd>(flat.data(), n_actions(), n_states()).transpose();
    out.theta = std::move(theta);
    return out;
  }

  double regularizer(const Eigen::MatrixXd& table) const override {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(n_states()) * n_actions());
    for (int s = 0; s < n_states(); ++s)
      for (int a = 0; a < n_actions(); ++a) flat(s * n_actions() + a) = table(s, a);
    const Eigen::VectorXd theta = features_.table().colPivHouseholderQr().solve(flat);
    return theta.squaredNorm();
  }

  const FeatureMap& features() const { return features_; }

 private:
  FeatureMap features_;
};

/// An explicit list of S x A tables with values in [0, bound]. The
/// regularizer is R(f) = sum over a fixed anchor set of f(x)^2.
class FiniteFunctionClass final : public RegressionOracle {
 public:
  FiniteFunctionClass(std::vector<Eigen::MatrixXd> members, std::vector<StateAction> anchors, double bound)
      : members_(std::move(members)), anchors_(std::move(anchors)) {
    if (members_.empty()) throw InputError("function class is empty");
    const Eigen::Index S = members_.front().rows(), A = members_.front().cols();
    for (const auto& f : members_) {
      if (f.rows() != S || f.cols() != A) throw InputError("function class members differ in shape");
      if (f.minCoeff() < 0.0 || f.maxCoeff() > bound) throw InputError("function class member outside [0, bound]");
    }
    for (const auto& x : anchors_)
      if (x.state < 0 || x.state >= S || x.action < 0 || x.action >= A) throw InputError("anchor out of range");
  }

  int n_states() const override { return static_cast<int>(members_.front().rows()); }
  int n_actions() const override { return static_cast<int>(members_.front().cols()); }
  int num_regularizers() const override { return static_cast<int>(anchors_.size()); }
  const std::vector<Eigen::MatrixXd>& members() const { return members_; }
  const std::vector<StateAction>& anchors() const { return anchors_; }

  /// Objective for member i; the minimizer is found by scanning all members.
  double objective(std::size_t i, std::span<const Sample> data, std::span<const double> reg_noise, double lambda) const {
    const Eigen::MatrixXd& f = members_[i];
    double loss = 0.0;
    for (const Sample& x : data) {
      const double r = f(x.state, x.action) - x.target;
      loss += r * r;
    }
    double reg = 0.0;
    for (std::size_t j = 0; j < anchors_.size(); ++j) {
      const double p = f(anchors_[j].state, anchors_[j].action) + reg_noise[j];
      reg += p * p;
    }
    return loss + lambda * reg;
  }

  FittedFunction fit(std::span<const Sample> data, std::span<const double> reg_noise, double lambda) const override {
    if (reg_noise.size() != anchors_.size()) throw InputError("finite class expects one noise per anchor");
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members_.size(); ++i) {
      const double v = objective(i, data, reg_noise, lambda);
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    return {members_[best], std::nullopt, static_cast<int>(best)};
  }

  double regularizer(const Eigen::MatrixXd& table) const override {
    double r = 0.0;
    for (const auto& x : anchors_) r += table(x.state, x.action) * table(x.state, x.action);
    return r;
  }

 private:
  std::vector<Eigen::MatrixXd> members_;
  std::vector<StateAction> anchors_;
};

/// Adds N(0, sigma^2) to every target (in data order), then draws one
/// N(0, sigma^2) noise per regularizer functional, then calls the oracle.
inline FittedFunction perturbed_fit(const RegressionOracle& oracle, std::span<const Sample> data, double sigma,
                                    double lambda, RandomStream& rng) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  std::vector<Sample> noisy(data.begin(), data.end());
  for (Sample& x : noisy) x.target += sigma * rng.normal();
  std::vector<double> reg_noise(static_cast<std::size_t>(oracle.num_regularizers()));
  for (double& e : reg_noise) e = sigma * rng.normal();
  return oracle.fit(noisy, reg_noise, lambda);
}

struct GfaPlan {
  std::vector<Eigen::MatrixXd> q;  // H tables, S x A, capped above at H - h
  Eigen::MatrixXd v;               // (H + 1) x S
  std::vector<std::vector<int>> policy;

  double operator()(int h, int s, int a) const { return q[h](s, a); }
};

/// Backward pass with M perturbed fits per step. Step h draws from
/// episode_stream.substream(h), fit after fit.
inline GfaPlan plan_gfa_phe(const std::vector<std::vector<TransitionRecord>>& data_by_step,
                            const RegressionOracle& oracle, int m, double sigma, double lambda,
                            const RandomStream& episode_stream) {
  if (m < 1) throw InputError("M must be at least 1");
  const int H = static_cast<int>(data_by_step.size());
  const int S = oracle.n_states(), A = oracle.n_actions();
  GfaPlan out;
  out.q.assign(H, Eigen::MatrixXd::Zero(S, A));
  out.v = Eigen::MatrixXd::Zero(H + 1, S);
  out.policy.assign(H, std::vector<int>(S, 0));
  std::vector<Sample> data;
  for (int h = H - 1; h >= 0; --h) {
    data.clear();
    for (const TransitionRecord& t : data_by_step[h])
      data.push_back({t.state, t.action, t.reward + out.v(h + 1, t.next_state)});
    RandomStream rng = episode_stream.substream(static_cast<std::uint64_t>(h));
    Eigen::MatrixXd best = Eigen::MatrixXd::Constant(S, A, -std::numeric_limits<double>::infinity());
    for (int j = 0; j < m; ++j) best = best.cwiseMax(perturbed_fit(oracle, data, sigma, lambda, rng).table);
    out.q[h] = best.cwiseMin(static_cast<double>(H - h));
    for (int s = 0; s < S; ++s) {
      const Eigen::VectorXd row = out.q[h].row(s).transpose();
      out.policy[h][s] = greedy_action(row);
      out.v(h, s) = row(out.policy[h][s]);
    }
  }
  return out;
}

inline std::vector<std::vector<TransitionRecord>> transitions_by_step(const History& history) {
  std::vector<std::vector<TransitionRecord>> out;
  for (int h = 0; h < history.horizon(); ++h) out.push_back(history.transitions(h));
  return out;
}

struct ConfidenceRegionReport {
  bool inside;
  double statistic;  // ||g - f||_Z^2 + lambda R(g - f)
};

inline double region_statistic(const RegressionOracle& oracle, const Eigen::MatrixXd& fitted,
                               const Eigen::MatrixXd& probe, std::span<const StateAction> inputs, double lambda) {
  const Eigen::MatrixXd diff = probe - fitted;
  double sq = 0.0;
  for (const auto& x : inputs) sq += diff(x.state, x.action) * diff(x.state, x.action);
  return sq + lambda * oracle.regularizer(diff);
}

inline ConfidenceRegionReport confidence_region_check(const RegressionOracle& oracle, const FittedFunction& fitted,
                                                      const Eigen::MatrixXd& probe,
                                                      std::span<const StateAction> inputs, double lambda, double beta) {
  const double stat = region_statistic(oracle, fitted.table, probe, inputs, lambda);
  return {stat <= beta, stat};
}

/// Members of a finite class inside the region around fitted.
inline std::vector<Eigen::MatrixXd> region_members(const FiniteFunctionClass& cls, const FittedFunction& fitted,
                                                   std::span<const StateAction> inputs, double lambda, double beta) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& f : cls.members())
    if (region_statistic(cls, fitted.table, f, inputs, lambda) <= beta) out.push_back(f);
  return out;
}

/// w(F, x) = max_{f, f' in F} f(x) - f'(x).
inline double width(std::span<const Eigen::MatrixXd> region, StateAction x) {
  if (region.empty()) throw InputError("width of an empty region (beta too small?)");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& f : region) {
    lo = std::min(lo, f(x.state, x.action));
    hi = std::max(hi, f(x.state, x.action));
  }
  return hi - lo;
}

}  // namespace phe
