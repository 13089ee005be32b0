// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gfa_fixtures.hpp"
#include "oracles.hpp"
#include "phe/phe.hpp"
#include "test_util.hpp"

namespace {

using namespace phe;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, args...);
  return buf;
}

Outcome sampler_equivalence() {
  testing::Fixture f = testing::make_fixture(3, 5, 1.0, 101);
  const double sigma = 1.0;
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  RandomStream rng_a(1), rng_b(2);
  constexpr int kSamples = 100000;
  const Eigen::MatrixXd a =
      perturbed_weight_matrix_direct(f.gram, hat.theta, sigma, kSamples, rng_a).colwise() - hat.theta;
  const Eigen::MatrixXd b =
      perturbed_weight_matrix_via_rewards(f.gram, f.data, sigma, kSamples, rng_b).colwise() - hat.theta;
  const Eigen::MatrixXd cov_a = oracle::sample_covariance(a), cov_b = oracle::sample_covariance(b);
  const Eigen::MatrixXd target = sigma * sigma * f.gram.inverse();
  const double err_a = (cov_a - target).norm() / target.norm();
  const double err_b = (cov_b - target).norm() / target.norm();
  const double err_ab = (cov_a - cov_b).norm() / cov_b.norm();
  return {err_a <= 0.05 && err_b <= 0.05 && err_ab <= 0.02,
          fmt("direct %.4f, via-rewards %.4f vs target; paths differ by %.4f", err_a, err_b, err_ab)};
}

Outcome anticoncentration() {
  testing::Fixture f = testing::make_fixture(3, 5, 1.0, 102);
  RandomStream rng(3);
  const double rate = anticoncentration_rate(f.gram, f.data.features.col(0), 1.0, 100000, rng);
  const double expected = oracle::normal_cdf(-1.0);
  return {std::abs(rate - expected) <= 0.01 && std::abs(expected - 0.1587) < 1e-4,
          fmt("rate %.4f, Phi(-1) %.4f", rate, expected)};
}

Outcome optimism_boost() {
  testing::Fixture f = testing::make_fixture(3, 5, 1.0, 103);
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  const double v = oracle::normal_cdf(-1.0);
  Outcome out{true, ""};
  for (int m : {1, 2, 4, 8}) {
    RandomStream rng(100 + m);
    const double rate = exceedance_rate(f.gram, hat.theta, f.data.features.col(2), 1.0, m, 1.0, 100000, rng);
    const double floor = 1.0 - std::pow(1.0 - v, m) - 0.01;
    out.pass = out.pass && rate >= floor;
    out.detail += fmt("M=%d %.4f>=%.4f ", m, rate, floor);
  }
  return out;
}

Outcome dp_oracle() {
  std::mt19937_64 gen(104);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int s = 1 + i % 3, a = 1 + (i / 3) % 2, h = 1 + (i / 6) % 3;
    const TabularMdp mdp = testing::random_mdp(s, a, h, gen);
    worst = std::max(worst, (optimal_values(mdp).v - oracle::enumerate_optimal_values(mdp)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max gap %.3g over 50 specs", worst)};
}

Outcome linear_algebra() {
  std::mt19937_64 gen(105);
  const int d = 10;
  GramState g(d, 1.0);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd phi = testing::unit_ball_point(d, gen);
    g.update(phi);
    gram += phi * phi.transpose();
  }
  const double inv_err = (g.inverse() - gram.inverse()).norm();
  bool bound_ok = true;
  double worst_ratio = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int dim = 2 + rep % 9, k = 100 + 50 * rep;
    const double lambda = rep % 2 ? 1.0 : 0.5;
    std::vector<Eigen::VectorXd> stream;
    for (int t = 0; t < k; ++t) stream.push_back(testing::unit_ball_point(dim, gen));
    const double ratio = elliptic_potential(stream, dim, lambda) / elliptic_potential_bound(dim, lambda, k);
    worst_ratio = std::max(worst_ratio, ratio);
    bound_ok = bound_ok && ratio <= 1.0;
  }
  return {inv_err <= 1e-8 && bound_ok,
          fmt("inverse error %.3g; worst potential/bound %.3f over 20 streams", inv_err, worst_ratio)};
}

// Per-seed series of one column, keyed by algo.
std::map<std::string, std::map<std::uint64_t, std::vector<double>>> by_algo_seed(const RunResult& r,
                                                                                  double RunRow::*field) {
  std::map<std::string, std::map<std::uint64_t, std::vector<double>>> out;
  for (const RunRow& row : r.rows) out[row.algo + " " + row.params_json][row.seed].push_back(row.*field);
  return out;
}

double tail_mean(const std::vector<double>& xs, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = xs.size() - n; i < xs.size(); ++i) total += xs[i];
  return total / static_cast<double>(n);
}

Outcome riverswim_comparison() {
  const json j = json::parse(R"({
    "env": {"type": "riverswim", "n_states": 12, "horizon": 40},
    "agent": [
      {"algo": "lsvi_phe", "sigma2": 0.2, "M": 4, "lambda": 0.003},
      {"algo": "lsvi_ucb", "beta": 5.0, "lambda": 0.003},
      {"algo": "eps_greedy", "epsilon": 0.1, "lambda": 0.003}
    ],
    "run": {"episodes": 3000, "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9], "plots": false}
  })");
  const ExperimentConfig cfg = parse_config(j);
  RiverSwimConfig rs;
  rs.n_states = 12;
  rs.horizon = 40;
  const double v_star = optimal_values(riverswim_spec(rs)).v(0, 0);
  const RunResult result = run_sweep(cfg, false);
  std::map<std::string, double> final_mean;
  for (const auto& [key, seeds] : by_algo_seed(result, &RunRow::ret)) {
    double total = 0.0;
    for (const auto& [seed, xs] : seeds) total += tail_mean(xs, 500);
    final_mean[key.substr(0, key.find(' '))] = total / static_cast<double>(seeds.size());
  }
  const double phe = final_mean["lsvi_phe"], ucb = final_mean["lsvi_ucb"], eps = final_mean["eps_greedy"];
  const double gap = std::abs(phe - ucb) / std::max(phe, ucb);
  const bool pass = phe >= 0.9 * v_star && ucb >= 0.9 * v_star && gap <= 0.1 && eps < 0.5 * v_star;
  return {pass, fmt("V*=%.4f; final-500 return: phe %.4f (%.1f%%), ucb %.4f (%.1f%%), eps %.4f (%.1f%%); gap %.1f%%",
                    v_star, phe, 100 * phe / v_star, ucb, 100 * ucb / v_star, eps, 100 * eps / v_star, 100 * gap)};
}

Outcome deepsea_ensemble() {
  const json j = json::parse(R"({
    "env": {"type": "deepsea", "depth": 10},
    "agent": {"algo": "lsvi_phe", "sigma2": 5e-4, "M": 1},
    "run": {"episodes": 1000, "seeds": [0, 1, 2, 3, 4], "plots": false},
    "sweep": {"agent.M": [1, 4, 16]}
  })");
  const ExperimentConfig cfg = parse_config(j);
  const RunResult result = run_sweep(cfg);
  const auto series = by_algo_seed(result, &RunRow::ret);
  std::vector<double> means;
  double pooled_var = 0.0;
  std::size_t n = 0;
  std::string detail;
  for (int m : {1, 4, 16}) {
    for (const auto& [key, seeds] : series) {
      if (json::parse(key.substr(key.find(' ') + 1)).at("M").get<int>() != m) continue;
      std::vector<double> xs;
      for (const auto& [seed, rets] : seeds) xs.push_back(tail_mean(rets, rets.size() / 4));
      n = xs.size();
      double mean = 0.0;
      for (double x : xs) mean += x / static_cast<double>(n);
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      pooled_var += ss / static_cast<double>(n - 1);
      means.push_back(mean);
      detail += fmt("M=%d %.4f ", m, mean);
    }
  }
  const double se = std::sqrt(pooled_var / static_cast<double>(means.size()) / static_cast<double>(n));
  bool pass = means.size() == 3;
  for (std::size_t i = 1; pass && i < means.size(); ++i) pass = means[i] >= means[i - 1] - se;
  return {pass, detail + fmt("(pooled se %.4f)", se)};
}

Outcome sublinear_regret() {
  const json j = json::parse(R"({
    "env": {"type": "riverswim", "n_states": 6, "horizon": 20},
    "agent": {"algo": "lsvi_phe", "sigma2": 0.2, "M": 8, "lambda": 0.01},
    "run": {"episodes": 2000, "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9], "plots": false}
  })");
  const RunResult result = run_sweep(parse_config(j), false);
  double total = 0.0;
  int runs = 0;
  for (const auto& [key, seeds] : by_algo_seed(result, &RunRow::regret_cum)) {
    for (const auto& [seed, reg] : seeds) {
      std::vector<double> xs, ys;
      for (std::size_t k = 0; k < reg.size(); ++k)
        if (reg[k] > 0.0) {
          xs.push_back(std::log(static_cast<double>(k + 1)));
          ys.push_back(std::log(reg[k]));
        }
      const auto len = static_cast<Eigen::Index>(xs.size());
      const Eigen::ArrayXd x = Eigen::Map<Eigen::ArrayXd>(xs.data(), len);
      const Eigen::ArrayXd y = Eigen::Map<Eigen::ArrayXd>(ys.data(), len);
      const Eigen::ArrayXd xc = x - x.mean();
      total += (xc * (y - y.mean())).sum() / xc.square().sum();
      ++runs;
    }
  }
  const double exponent = total / runs;
  return {exponent < 0.9, fmt("mean log-log slope %.3f over %d seeds", exponent, runs)};
}

Outcome gfa_coherence() {
  bool coherent = true;
  double gap = 0.0;
  for (std::uint64_t seed : {11, 12, 13}) {
    const fixtures::CrossCheck c = fixtures::cross_check_linear(seed);
    coherent = coherent && c.clip_inactive && c.policies_match && c.actions_match;
    gap = std::max(gap, c.max_q_gap);
  }
  const double delta = 0.1;
  const fixtures::Coverage cov = fixtures::calibrated_coverage(500, delta, 7);
  return {coherent && cov.rate >= 1.0 - delta,
          fmt("actions match: %s, max Q gap %.2g; coverage %.3f at beta %.3f", coherent ? "yes" : "no", gap, cov.rate,
              cov.beta)};
}

Outcome determinism() {
  const json j = json::parse(R"({
    "env": {"type": "riverswim", "n_states": 6, "horizon": 20},
    "agent": [
      {"algo": "lsvi_phe", "sigma2": 0.2, "M": 4},
      {"algo": "lsvi_ucb", "beta": 1.0},
      {"algo": "eps_greedy", "epsilon": 0.1}
    ],
    "run": {"episodes": 40, "seeds": [3, 1, 2], "plots": false},
    "sweep": {"agent.lambda": [0.1, 1.0]}
  })");
  const ExperimentConfig cfg = parse_config(j);
  std::ostringstream first, second;
  write_csv(run_sweep(cfg), first);
  write_csv(run_sweep(cfg), second);
  return {first.str() == second.str() && first.str().size() > 1000, fmt("%zu bytes per run", first.str().size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sampler path equivalence", sampler_equivalence},
      {"anti-concentration constant", anticoncentration},
      {"optimism boost over M", optimism_boost},
      {"backward induction vs enumeration", dp_oracle},
      {"rank-one inverse and elliptic potential", linear_algebra},
      {"RiverSwim-12 agent comparison", riverswim_comparison},
      {"DeepSea-10 ensemble size", deepsea_ensemble},
      {"sublinear regret on RiverSwim-6", sublinear_regret},
      {"general planner coherence and coverage", gfa_coherence},
      {"sweep determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
