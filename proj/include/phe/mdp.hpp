#pragma once

// Finite-horizon episodic MDPs, exact dynamic programming, rollouts and
// regret bookkeeping.
//
// Steps are 0-based throughout the code: h = 0 is the first decision of an
// episode and h = H - 1 the last. Values at step h therefore live in
// [0, H - h].

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phe/errors.hpp"
#include "phe/random.hpp"

namespace phe {

inline constexpr double kProbabilitySumTolerance = 1e-12;

/// Raw arrays for a time-inhomogeneous tabular MDP.
///
/// transition is indexed [((h * S + s) * A + a) * S + s'], reward is indexed
/// [(h * S + s) * A + a].
struct MdpData {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  int initial_state = 0;
};

class TabularMdp {
 public:
  explicit TabularMdp(MdpData data) : d_(std::move(data)) { validate(); }

  /// Broadcasts one (S*A*S transition, S*A reward) model over every step.
  static TabularMdp stationary(int n_states, int n_actions, int horizon,
                               std::span<const double> transition, std::span<const double> reward,
                               int initial_state = 0) {
    if (horizon < 1) throw InputError("horizon must be positive");
    const std::size_t tsz = static_cast<std::size_t>(n_states) * n_actions * n_states;
    const std::size_t rsz = static_cast<std::size_t>(n_states) * n_actions;
    if (n_states < 1 || n_actions < 1 || transition.size() != tsz || reward.size() != rsz)
      throw InputError("stationary model arrays do not match the state/action counts");
    MdpData d{n_states, n_actions, horizon, {}, {}, initial_state};
    d.transition.reserve(tsz * horizon);
    d.reward.reserve(rsz * horizon);
    for (int h = 0; h < horizon; ++h) {
      d.transition.insert(d.transition.end(), transition.begin(), transition.end());
      d.reward.insert(d.reward.end(), reward.begin(), reward.end());
    }
    return TabularMdp(std::move(d));
  }

  int n_states() const { return d_.n_states; }
  int n_actions() const { return d_.n_actions; }
  int horizon() const { return d_.horizon; }
  int initial_state() const { return d_.initial_state; }
  const MdpData& data() const { return d_; }

  std::span<const double> transition_row(int h, int s, int a) const {
    check_index(h, s, a);
    return {d_.transition.data() + row_offset(h, s, a) * d_.n_states,
            static_cast<std::size_t>(d_.n_states)};
  }

  double probability(int h, int s, int a, int next) const {
    if (next < 0 || next >= d_.n_states) throw InputError("next-state index out of range");
    return transition_row(h, s, a)[next];
  }

  double reward(int h, int s, int a) const {
    check_index(h, s, a);
    return d_.reward[row_offset(h, s, a)];
  }

  void check_index(int h, int s, int a) const {
    if (h < 0 || h >= d_.horizon || s < 0 || s >= d_.n_states || a < 0 || a >= d_.n_actions)
      throw InputError("index out of range: h=" + std::to_string(h) + " s=" + std::to_string(s) +
                       " a=" + std::to_string(a));
  }

 private:
  std::size_t row_offset(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * d_.n_states + s) * d_.n_actions + a;
  }

  void validate() const {
    if (d_.n_states < 1 || d_.n_actions < 1 || d_.horizon < 1)
      throw InputError("n_states, n_actions and horizon must be positive");
    const std::size_t rows = static_cast<std::size_t>(d_.horizon) * d_.n_states * d_.n_actions;
    if (d_.transition.size() != rows * d_.n_states || d_.reward.size() != rows)
      throw InputError("transition/reward arrays have the wrong size");
    if (d_.initial_state < 0 || d_.initial_state >= d_.n_states)
      throw InputError("initial_state out of range");
    for (std::size_t row = 0; row < rows; ++row) {
      double sum = 0.0;
      for (int n = 0; n < d_.n_states; ++n) {
        const double p = d_.transition[row * d_.n_states + n];
        if (!(p >= 0.0)) throw InputError("negative or NaN transition probability in row " + std::to_string(row));
        sum += p;
      }
      if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
        throw InputError("transition row " + std::to_string(row) + " sums to " + std::to_string(sum));
      const double r = d_.reward[row];
      if (!(r >= 0.0 && r <= 1.0)) throw InputError("reward outside [0,1] in row " + std::to_string(row));
    }
  }

  MdpData d_;
};

struct StepOutcome {
  int next_state;
  double reward;
};

/// Samples s' ~ P_h(.|s,a) by inverse CDF over the stored row.
inline StepOutcome step(const TabularMdp& mdp, int h, int s, int a, RandomStream& rng) {
  const auto row = mdp.transition_row(h, s, a);
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (int n = 0; n < mdp.n_states(); ++n) {
    if (row[n] <= 0.0) continue;
    cumulative += row[n];
    last_positive = n;
    if (u < cumulative) return {n, mdp.reward(h, s, a)};
  }
  return {last_positive, mdp.reward(h, s, a)};
}

/// Q_h(s,a) and V_h(s) for h = 0..H-1, with V_H == 0 appended.
struct ValueTable {
  std::vector<Eigen::MatrixXd> q;  // H entries, each S x A
  Eigen::MatrixXd v;               // (H + 1) x S

  double value(int h, int s) const { return v(h, s); }
  double action_value(int h, int s, int a) const { return q[h](s, a); }
};

/// Lowest-index argmax.
template <class Row>
int greedy_action(const Row& row) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

inline double expected_next_value(const TabularMdp& mdp, int h, int s, int a,
                                  const Eigen::MatrixXd& v) {
  const auto row = mdp.transition_row(h, s, a);
  double total = 0.0;
  for (int n = 0; n < mdp.n_states(); ++n) total += row[n] * v(h + 1, n);
  return total;
}

/// Exact Q*, V* by backward induction.
inline ValueTable optimal_values(const TabularMdp& mdp) {
  const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
  ValueTable out;
  out.q.assign(H, Eigen::MatrixXd::Zero(S, A));
  out.v = Eigen::MatrixXd::Zero(H + 1, S);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a)
        out.q[h](s, a) = mdp.reward(h, s, a) + expected_next_value(mdp, h, s, a, out.v);
      out.v(h, s) = out.q[h].row(s).maxCoeff();
    }
  }
  return out;
}

/// A Markov policy: per step an S x A matrix of action probabilities.
struct Policy {
  std::vector<Eigen::MatrixXd> probs;

  static Policy deterministic(const std::vector<std::vector<int>>& actions, int n_actions) {
    Policy p;
    for (const auto& step_actions : actions) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(step_actions.size()), n_actions);
      for (std::size_t s = 0; s < step_actions.size(); ++s) m(static_cast<Eigen::Index>(s), step_actions[s]) = 1.0;
      p.probs.push_back(std::move(m));
    }
    return p;
  }
};

/// Greedy policy of per-step Q tables, mixed with a uniform choice at rate epsilon.
inline Policy greedy_policy(const std::vector<Eigen::MatrixXd>& q, double epsilon = 0.0) {
  Policy p;
  p.probs.reserve(q.size());
  for (const auto& table : q) {
    const Eigen::Index A = table.cols();
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(table.rows(), A, epsilon / static_cast<double>(A));
    for (Eigen::Index s = 0; s < table.rows(); ++s) {
      const Eigen::VectorXd row = table.row(s).transpose();
      m(s, greedy_action(row)) += 1.0 - epsilon;
    }
    p.probs.push_back(std::move(m));
  }
  return p;
}

/// Exact Q^pi, V^pi by backward policy evaluation.
inline ValueTable evaluate_policy(const TabularMdp& mdp, const Policy& pi) {
  const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
  if (static_cast<int>(pi.probs.size()) != H) throw InputError("policy length differs from horizon");
  ValueTable out;
  out.q.assign(H, Eigen::MatrixXd::Zero(S, A));
  out.v = Eigen::MatrixXd::Zero(H + 1, S);
  for (int h = H - 1; h >= 0; --h) {
    if (pi.probs[h].rows() != S || pi.probs[h].cols() != A) throw InputError("policy table shape mismatch");
    for (int s = 0; s < S; ++s) {
      double vs = 0.0;
      for (int a = 0; a < A; ++a) {
        out.q[h](s, a) = mdp.reward(h, s, a) + expected_next_value(mdp, h, s, a, out.v);
        vs += pi.probs[h](s, a) * out.q[h](s, a);
      }
      out.v(h, s) = vs;
    }
  }
  return out;
}

struct TransitionRecord {
  int h;
  int state;
  int action;
  double reward;
  int next_state;
};

struct Trajectory {
  int episode = 0;
  std::vector<TransitionRecord> steps;
  double realized_return = 0.0;
};

/// Runs one episode; choose(h, s) returns the action to take.
template <class Chooser>
Trajectory rollout(const TabularMdp& mdp, int episode, RandomStream& rng, Chooser&& choose) {
  Trajectory traj;
  traj.episode = episode;
  traj.steps.reserve(static_cast<std::size_t>(mdp.horizon()));
  int s = mdp.initial_state();
  for (int h = 0; h < mdp.horizon(); ++h) {
    const int a = choose(h, s);
    const StepOutcome out = step(mdp, h, s, a, rng);
    traj.steps.push_back({h, s, a, out.reward, out.next_state});
    traj.realized_return += out.reward;
    s = out.next_state;
  }
  return traj;
}

/// Greedy rollout on q(h, s, a) with lowest-index tie-breaking.
template <class QEvaluator>
Trajectory run_episode(QEvaluator&& q, const TabularMdp& mdp, int episode, RandomStream& rng) {
  std::vector<double> row(static_cast<std::size_t>(mdp.n_actions()));
  return rollout(mdp, episode, rng, [&](int h, int s) {
    for (int a = 0; a < mdp.n_actions(); ++a) row[a] = q(h, s, a);
    return greedy_action(row);
  });
}

struct LedgerRecord {
  int episode;
  double realized_return;
  double value_exact;  // V_1^{pi_k}(s_1^k)
  double v_star;
  double regret;       // v_star - value_exact
  double regret_cum;
  double proxy_regret_cum;  // cumulative v_star - realized_return
};

class RegretLedger {
 public:
  void append(const Trajectory& traj, double v_star, double value_exact) {
    const double prev = records_.empty() ? 0.0 : records_.back().regret_cum;
    const double prev_proxy = records_.empty() ? 0.0 : records_.back().proxy_regret_cum;
    const double inst = v_star - value_exact;
    records_.push_back({traj.episode, traj.realized_return, value_exact, v_star, inst, prev + inst,
                        prev_proxy + (v_star - traj.realized_return)});
  }

  const std::vector<LedgerRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const LedgerRecord& back() const { return records_.back(); }

 private:
  std::vector<LedgerRecord> records_;
};

inline void update_ledger(RegretLedger& ledger, const Trajectory& traj, double v_star, double value_exact) {
  ledger.append(traj, v_star, value_exact);
}

// Without an exact policy value the realized return stands in for it.
inline void update_ledger(RegretLedger& ledger, const Trajectory& traj, double v_star) {
  ledger.append(traj, v_star, traj.realized_return);
}

}  // namespace phe
