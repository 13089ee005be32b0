#pragma once

// Least-squares value iteration planners over a linear feature map:
// LSVI-PHE (max over M perturbed regressions), RLSVI (M = 1), LSVI-UCB
// (additive elliptical bonus) and greedy LSVI used by epsilon-greedy.
//
// Every planner replans from the whole history each episode: the
// regression targets r + V_{h+1}(s') change with the current V, so they are
// recomputed for all past samples. Gram matrices and feature columns are
// maintained incrementally.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "phe/errors.hpp"
#include "phe/features.hpp"
#include "phe/mdp.hpp"
#include "phe/perturbed_ls.hpp"
#include "phe/random.hpp"

namespace phe {

enum class Algorithm { kLsviPhe, kRlsvi, kLsviUcb, kEpsilonGreedy };
enum class SamplerPath { kDirect, kViaRewards };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kLsviPhe: return "lsvi_phe";
    case Algorithm::kRlsvi: return "rlsvi";
    case Algorithm::kLsviUcb: return "lsvi_ucb";
    case Algorithm::kEpsilonGreedy: return "eps_greedy";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& name) {
  if (name == "lsvi_phe") return Algorithm::kLsviPhe;
  if (name == "rlsvi") return Algorithm::kRlsvi;
  if (name == "lsvi_ucb") return Algorithm::kLsviUcb;
  if (name == "eps_greedy") return Algorithm::kEpsilonGreedy;
  throw InputError("unknown algorithm '" + name + "'");
}

struct AgentConfig {
  Algorithm algorithm = Algorithm::kLsviPhe;
  double sigma2 = 0.2;
  std::optional<int> m;  // unset: theoretical M for (d, delta)
  double beta = 5.0;
  double epsilon = 0.1;
  double lambda = 1.0;
  double delta = 0.1;
  SamplerPath sampler = SamplerPath::kDirect;
};

inline void validate(const AgentConfig& c) {
  if (!(c.lambda > 0.0)) throw InputError("lambda must be positive");
  if ((c.algorithm == Algorithm::kLsviPhe || c.algorithm == Algorithm::kRlsvi) && !(c.sigma2 > 0.0))
    throw InputError("sigma2 must be positive");
  if (c.m && *c.m < 1) throw InputError("M must be at least 1");
  if (!(c.delta > 0.0 && c.delta <= 1.0)) throw InputError("delta must lie in (0,1]");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) throw InputError("epsilon must lie in [0,1]");
  if (!(c.beta >= 0.0)) throw InputError("beta must be nonnegative");
}

/// M = d log(delta / 9) / log Phi(1), rounded up.
inline int theoretical_m(int dim, double delta) {
  const double m = dim * std::log(delta / 9.0) / std::log(standard_normal_cdf(1.0));
  return std::max(1, static_cast<int>(std::ceil(m)));
}

/// M = ln(T |S| |A| / delta) / ln(1 / (1 - v)), rounded up. Only meaningful
/// for finite state-action spaces.
inline int theoretical_m_finite(long long total_steps, int n_states, int n_actions, double delta) {
  const double v = anticoncentration_probability();
  const double m = std::log(static_cast<double>(total_steps) * n_states * n_actions / delta) / std::log(1.0 / (1.0 - v));
  return std::max(1, static_cast<int>(std::ceil(m)));
}

inline int resolved_m(const AgentConfig& c, int dim) {
  if (c.algorithm == Algorithm::kRlsvi) return 1;
  return c.m ? *c.m : theoretical_m(dim, c.delta);
}

/// Replay data split by step, with per-step Gram state and feature columns.
class History {
 public:
  History(FeatureMap features, int horizon, double lambda) : features_(std::move(features)) {
    if (horizon < 1) throw InputError("horizon must be positive");
    steps_.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) steps_.emplace_back(features_.dim(), lambda);
  }

  void append(const Trajectory& traj) {
    if (static_cast<int>(traj.steps.size()) != horizon()) throw InputError("trajectory length differs from horizon");
    for (const TransitionRecord& t : traj.steps) {
      StepBuffer& b = steps_[t.h];
      const auto phi = features_.row(t.state, t.action).transpose();
      b.gram.update(phi);
      if (b.n == b.columns.cols()) b.columns.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, 2 * b.n));
      b.columns.col(b.n) = phi;
      b.transitions.push_back(t);
      b.rewards.push_back(t.reward);
      b.next_states.push_back(t.next_state);
      ++b.n;
    }
    ++episodes_;
  }

  int horizon() const { return static_cast<int>(steps_.size()); }
  int episodes() const { return episodes_; }
  const FeatureMap& features() const { return features_; }
  const std::vector<TransitionRecord>& transitions(int h) const { return steps_.at(h).transitions; }
  GramState& gram(int h) { return steps_.at(h).gram; }
  const GramState& gram(int h) const { return steps_.at(h).gram; }

  /// d x n features of the samples seen at step h.
  auto feature_columns(int h) const { return steps_.at(h).columns.leftCols(steps_.at(h).n); }

  /// y_tau = r_tau + V_{h+1}(s'_tau) for every sample at step h.
  Eigen::VectorXd targets(int h, const Eigen::VectorXd& next_values) const {
    const StepBuffer& b = steps_.at(h);
    Eigen::VectorXd y(b.n);
    for (Eigen::Index t = 0; t < b.n; ++t) y(t) = b.rewards[t] + next_values(b.next_states[t]);
    return y;
  }

  RegressionTargetSet target_set(int h, const Eigen::VectorXd& next_values) const {
    return {feature_columns(h), targets(h, next_values)};
  }

 private:
  struct StepBuffer {
    StepBuffer(int d, double lambda) : gram(d, lambda), columns(d, 0) {}
    GramState gram;
    Eigen::MatrixXd columns;
    Eigen::Index n = 0;
    std::vector<TransitionRecord> transitions;
    std::vector<double> rewards;
    std::vector<int> next_states;
  };

  FeatureMap features_;
  std::vector<StepBuffer> steps_;
  int episodes_ = 0;
};

/// Per-step clipped Q tables plus the regression weights that produced them.
struct QEstimate {
  std::vector<Eigen::MatrixXd> q;            // H tables, S x A
  std::vector<Eigen::VectorXd> theta_hat;    // unperturbed ridge solution per step
  std::vector<Eigen::MatrixXd> weights;      // d x M perturbed weights per step (empty for UCB/greedy)

  double operator()(int h, int s, int a) const { return q[h](s, a); }
  double value(int h, int s) const { return q[h].row(s).maxCoeff(); }
  int horizon() const { return static_cast<int>(q.size()); }
};

namespace detail {

// Reshapes a length S*A column (row index s*A + a) into S x A, clipped to [0, cap].
inline Eigen::MatrixXd clipped_table(const Eigen::VectorXd& flat, int n_states, int n_actions, double cap) {
  Eigen::MatrixXd out(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) out(s, a) = std::clamp(flat(s * n_actions + a), 0.0, cap);
  return out;
}

inline Eigen::VectorXd state_values(const Eigen::MatrixXd& q) { return q.rowwise().maxCoeff(); }

template <class StepFn>
QEstimate backward_pass(History& history, StepFn&& fit_step) {
  const FeatureMap& phi = history.features();
  const int H = history.horizon();
  QEstimate out;
  out.q.resize(H);
  out.theta_hat.resize(H);
  out.weights.resize(H);
  Eigen::VectorXd next_values = Eigen::VectorXd::Zero(phi.n_states());
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd y = history.targets(h, next_values);
    GramState& g = history.gram(h);
    Eigen::VectorXd theta_hat = ridge_solve(g, history.feature_columns(h) * y).theta;
    const Eigen::VectorXd raw = fit_step(h, g, y, theta_hat, out.weights[h]);
    out.q[h] = clipped_table(raw, phi.n_states(), phi.n_actions(), static_cast<double>(H - h));
    out.theta_hat[h] = std::move(theta_hat);
    next_values = state_values(out.q[h]);
  }
  return out;
}

}  // namespace detail

/// LSVI-PHE: Q_h = clip(max_j phi^T theta_tilde_j, [0, H - h]) with M draws
/// per step. Step h draws from episode_stream.substream(h).
inline QEstimate plan_lsvi_phe(History& history, const AgentConfig& cfg, const RandomStream& episode_stream) {
  validate(cfg);
  const double sigma = std::sqrt(cfg.sigma2);
  const int m = resolved_m(cfg, history.features().dim());
  const Eigen::MatrixXd& table = history.features().table();
  return detail::backward_pass(history, [&](int h, GramState& g, const Eigen::VectorXd& y,
                                            const Eigen::VectorXd& theta_hat, Eigen::MatrixXd& weights) {
    RandomStream rng = episode_stream.substream(static_cast<std::uint64_t>(h));
    if (cfg.sampler == SamplerPath::kDirect) {
      weights = perturbed_weight_matrix_direct(g, theta_hat, sigma, m, rng);
    } else {
      weights = perturbed_weight_matrix_via_rewards(g, {history.feature_columns(h), y}, sigma, m, rng);
    }
    const Eigen::MatrixXd values = table * weights;
    return Eigen::VectorXd(values.rowwise().maxCoeff());
  });
}

/// RLSVI is LSVI-PHE with a single perturbed regression per step.
inline QEstimate plan_rlsvi(History& history, const AgentConfig& cfg, const RandomStream& episode_stream) {
  AgentConfig single = cfg;
  single.algorithm = Algorithm::kRlsvi;
  single.m = 1;
  return plan_lsvi_phe(history, single, episode_stream);
}

/// LSVI-UCB: Q_h = clip(phi^T theta_hat + beta ||phi||_{Lambda^{-1}}, [0, H - h]).
inline QEstimate plan_lsvi_ucb(History& history, const AgentConfig& cfg, const RandomStream& /*episode_stream*/ = RandomStream()) {
  validate(cfg);
  const Eigen::MatrixXd& table = history.features().table();
  return detail::backward_pass(history, [&](int, GramState& g, const Eigen::VectorXd&,
                                            const Eigen::VectorXd& theta_hat, Eigen::MatrixXd&) {
    Eigen::VectorXd raw = table * theta_hat;
    if (cfg.beta > 0.0) {
      const Eigen::VectorXd widths = ((table * g.inverse()).array() * table.array()).rowwise().sum().max(0.0).sqrt();
      raw += cfg.beta * widths;
    }
    return raw;
  });
}

/// Unperturbed least-squares value iteration (the epsilon-greedy base).
inline QEstimate plan_lsvi_greedy(History& history, const AgentConfig& cfg) {
  AgentConfig greedy = cfg;
  greedy.beta = 0.0;
  return plan_lsvi_ucb(history, greedy);
}

inline QEstimate plan(History& history, const AgentConfig& cfg, const RandomStream& episode_stream) {
  switch (cfg.algorithm) {
    case Algorithm::kLsviPhe: return plan_lsvi_phe(history, cfg, episode_stream);
    case Algorithm::kRlsvi: return plan_rlsvi(history, cfg, episode_stream);
    case Algorithm::kLsviUcb: return plan_lsvi_ucb(history, cfg, episode_stream);
    case Algorithm::kEpsilonGreedy: return plan_lsvi_greedy(history, cfg);
  }
  throw InputError("unknown algorithm");
}

/// Greedy action at (h, s) with lowest-index ties; with probability epsilon
/// a uniformly random action instead. No randomness is drawn when epsilon is 0.
inline int act(const QEstimate& q, int h, int s, RandomStream& rng, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InputError("epsilon must lie in [0,1]");
  const Eigen::Index n_actions = q.q.at(h).cols();
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.uniform_int(static_cast<int>(n_actions));
  const Eigen::VectorXd row = q.q[h].row(s).transpose();
  return greedy_action(row);
}

inline double exploration_epsilon(const AgentConfig& cfg) {
  return cfg.algorithm == Algorithm::kEpsilonGreedy ? cfg.epsilon : 0.0;
}

}  // namespace phe
