#pragma once

// Hard-exploration benchmarks built as TabularMdp values, and the one-hot
// feature map that makes any tabular MDP a linear MDP.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "phe/errors.hpp"
#include "phe/features.hpp"
#include "phe/mdp.hpp"

namespace phe {

namespace riverswim {
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
}  // namespace riverswim

/// Chain of n_states; action 0 drifts left deterministically, action 1
/// swims right against the current.
struct RiverSwimConfig {
  int n_states = 6;
  int horizon = 20;
  // "swim right" from an interior state
  double p_right = 0.3;
  double p_stay = 0.6;
  double p_left = 0.1;
  // "swim right" from the leftmost state
  double start_stay = 0.7;
  double start_advance = 0.3;
  // "swim right" from the rightmost state
  double end_stay = 0.7;
  double end_slip = 0.3;
  double r_left_state = 0.005;
  double r_goal = 1.0;
};

inline void validate(const RiverSwimConfig& c) {
  auto sums_to_one = [](double total) { return std::abs(total - 1.0) <= kProbabilitySumTolerance; };
  if (c.n_states < 2) throw InputError("riverswim needs at least 2 states");
  if (c.horizon < 1) throw InputError("riverswim horizon must be positive");
  if (!sums_to_one(c.p_right + c.p_stay + c.p_left)) throw InputError("riverswim interior probabilities must sum to 1");
  if (!sums_to_one(c.start_stay + c.start_advance)) throw InputError("riverswim start probabilities must sum to 1");
  if (!sums_to_one(c.end_stay + c.end_slip)) throw InputError("riverswim end probabilities must sum to 1");
  for (double p : {c.p_right, c.p_stay, c.p_left, c.start_stay, c.start_advance, c.end_stay, c.end_slip})
    if (p < 0.0) throw InputError("riverswim probabilities must be nonnegative");
  for (double r : {c.r_left_state, c.r_goal})
    if (r < 0.0 || r > 1.0) throw InputError("riverswim rewards must lie in [0,1]");
  if (!(c.r_goal > c.r_left_state)) throw InputError("riverswim r_goal must exceed r_left_state");
}

inline TabularMdp riverswim_spec(const RiverSwimConfig& c) {
  validate(c);
  const int S = c.n_states, A = 2;
  std::vector<double> trans(static_cast<std::size_t>(S) * A * S, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(S) * A, 0.0);
  auto p = [&](int s, int a, int next) -> double& { return trans[(static_cast<std::size_t>(s) * A + a) * S + next]; };

  for (int s = 0; s < S; ++s) {
    p(s, riverswim::kLeft, std::max(s - 1, 0)) = 1.0;
    if (s == 0) {
      p(s, riverswim::kRight, 0) += c.start_stay;
      p(s, riverswim::kRight, 1) += c.start_advance;
    } else if (s == S - 1) {
      p(s, riverswim::kRight, s) += c.end_stay;
      p(s, riverswim::kRight, s - 1) += c.end_slip;
    } else {
      p(s, riverswim::kRight, s - 1) += c.p_left;
      p(s, riverswim::kRight, s) += c.p_stay;
      p(s, riverswim::kRight, s + 1) += c.p_right;
    }
  }
  reward[0 * A + riverswim::kLeft] = c.r_left_state;
  reward[static_cast<std::size_t>(S - 1) * A + riverswim::kRight] = c.r_goal;
  return TabularMdp::stationary(S, A, c.horizon, trans, reward, 0);
}

namespace deepsea {
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
}  // namespace deepsea

/// N x N grid descended one row per step; horizon is N.
///
/// Rewards are shifted into [0,1]: "left" pays move_right_cost, "right"
/// pays nothing, so moving right still costs relative to moving left.
/// Occupying the bottom-right cell on the final step pays goal_reward for
/// either action.
struct DeepSeaConfig {
  int depth = 10;
  double move_right_cost = -1.0;  // negative selects the default 0.01 / depth
  double goal_reward = 1.0;

  double effective_move_right_cost() const { return move_right_cost < 0.0 ? 0.01 / depth : move_right_cost; }
};

inline int deepsea_cell(int depth, int row, int col) { return row * depth + col; }

inline TabularMdp deepsea_spec(const DeepSeaConfig& c) {
  const int N = c.depth;
  if (N < 2) throw InputError("deepsea depth must be at least 2");
  const double cost = c.effective_move_right_cost();
  if (cost < 0.0 || cost > 1.0) throw InputError("deepsea move_right_cost must lie in [0,1]");
  if (!(c.goal_reward > 0.0 && c.goal_reward <= 1.0)) throw InputError("deepsea goal_reward must lie in (0,1]");

  const int S = N * N, A = 2;
  std::vector<double> trans(static_cast<std::size_t>(S) * A * S, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(S) * A, 0.0);
  for (int row = 0; row < N; ++row) {
    for (int col = 0; col < N; ++col) {
      const int s = deepsea_cell(N, row, col);
      const bool bottom = row == N - 1;
      const int left_next = bottom ? s : deepsea_cell(N, row + 1, std::max(col - 1, 0));
      const int right_next = bottom ? s : deepsea_cell(N, row + 1, std::min(col + 1, N - 1));
      trans[(static_cast<std::size_t>(s) * A + deepsea::kLeft) * S + left_next] = 1.0;
      trans[(static_cast<std::size_t>(s) * A + deepsea::kRight) * S + right_next] = 1.0;
      if (bottom && col == N - 1) {
        reward[static_cast<std::size_t>(s) * A + deepsea::kLeft] = c.goal_reward;
        reward[static_cast<std::size_t>(s) * A + deepsea::kRight] = c.goal_reward;
      } else {
        reward[static_cast<std::size_t>(s) * A + deepsea::kLeft] = cost;
      }
    }
  }
  return TabularMdp::stationary(S, A, N, trans, reward, deepsea_cell(N, 0, 0));
}

/// One-hot phi(s, a) = e_{s*A + a}; d = S * A.
inline FeatureMap tabular_features(const TabularMdp& mdp) {
  const int d = mdp.n_states() * mdp.n_actions();
  return FeatureMap(mdp.n_states(), mdp.n_actions(), Eigen::MatrixXd::Identity(d, d));
}

}  // namespace phe
