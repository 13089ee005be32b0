#pragma once

#include <Eigen/Dense>

#include <string>

#include "phe/errors.hpp"

namespace phe {

/// phi(s, a) over a finite state-action space, stored as an (S*A) x d table.
///
/// Row s * A + a holds phi(s, a). Every row must satisfy ||phi|| <= 1.
class FeatureMap {
 public:
  FeatureMap(int n_states, int n_actions, Eigen::MatrixXd table)
      : n_states_(n_states), n_actions_(n_actions), table_(std::move(table)) {
    if (table_.rows() != static_cast<Eigen::Index>(n_states) * n_actions)
      throw InputError("feature table must have n_states * n_actions rows");
    if (table_.cols() < 1) throw InputError("feature dimension must be positive");
    for (Eigen::Index r = 0; r < table_.rows(); ++r) {
      const double norm = table_.row(r).norm();
      if (!(norm <= 1.0 + 1e-12)) throw InputError("feature row " + std::to_string(r) + " has norm > 1");
    }
  }

  template <class Fn>
  static FeatureMap from_function(int n_states, int n_actions, int dim, Fn&& phi) {
    Eigen::MatrixXd table(static_cast<Eigen::Index>(n_states) * n_actions, dim);
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) table.row(s * n_actions + a) = Eigen::VectorXd(phi(s, a)).transpose();
    return FeatureMap(n_states, n_actions, std::move(table));
  }

  int dim() const { return static_cast<int>(table_.cols()); }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const Eigen::MatrixXd& table() const { return table_; }

  Eigen::VectorXd operator()(int s, int a) const { return table_.row(index(s, a)).transpose(); }
  auto row(int s, int a) const { return table_.row(index(s, a)); }

  Eigen::Index index(int s, int a) const {
    if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_) throw InputError("feature index out of range");
    return static_cast<Eigen::Index>(s) * n_actions_ + a;
  }

 private:
  int n_states_;
  int n_actions_;
  Eigen::MatrixXd table_;
};

}  // namespace phe
