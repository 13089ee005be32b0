#include "phe/perturbed_ls.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"

namespace phe {
namespace {

using testing::Fixture;
using testing::make_fixture;
using testing::unit_ball_point;

TEST(GramStateTest, FreshStateHasIdentityInverse) {
  GramState g(4, 1.0);
  EXPECT_EQ(g.inverse(), Eigen::MatrixXd::Identity(4, 4));
  EXPECT_EQ(g.count(), 0);
}

TEST(GramStateTest, SingleUnitUpdateClosedForm) {
  GramState g(3, 1.0);
  g.update(Eigen::Vector3d(1, 0, 0));
  EXPECT_DOUBLE_EQ(g.inverse()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.inverse()(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.inverse()(2, 2), 1.0);
}

TEST(GramStateTest, DimensionMismatchAndBadLambdaThrow) {
  GramState g(3, 1.0);
  EXPECT_THROW(g.update(Eigen::Vector2d(1, 0)), InputError);
  EXPECT_THROW(g.update(Eigen::Vector3d(1, 1, 1)), InputError);
  EXPECT_THROW(GramState(3, 0.0), InputError);
}

TEST(GramStateTest, MaintainedInverseMatchesDenseInverse) {
  std::mt19937_64 gen(1);
  const int d = 10;
  GramState g(d, 1.0);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd phi = unit_ball_point(d, gen);
    g.update(phi);
    gram += phi * phi.transpose();
  }
  EXPECT_LE((g.gram() - gram).norm(), 1e-12);
  EXPECT_LE((g.inverse() - gram.inverse()).norm(), 1e-8);
  EXPECT_LE((g.gram() * g.inverse() - Eigen::MatrixXd::Identity(d, d)).norm(), 1e-8);
}

TEST(GramStateTest, CoherenceSurvivesDenseRefresh) {
  std::mt19937_64 gen(2);
  const int d = 6;
  GramState g(d, 0.5);
  for (int t = 0; t < kFactorRefreshInterval + 90; ++t) {
    g.update(unit_ball_point(d, gen));
    if (t % 97 == 0) {
      const Eigen::MatrixXd l = g.inverse_factor();
      ASSERT_LE((l * l.transpose() - g.inverse()).norm(), 1e-10);
    }
  }
  const Eigen::MatrixXd l = g.inverse_factor();
  EXPECT_LE((l * l.transpose() - g.inverse()).norm(), 1e-10);
  EXPECT_LE((g.inverse() - g.gram().inverse()).norm(), 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.gram());
  EXPECT_GE(eig.eigenvalues().minCoeff(), 0.5 - 1e-12);
}

TEST(GramStateTest, FactorGoesStaleOnUpdate) {
  GramState g(2, 1.0);
  (void)g.inverse_factor();
  EXPECT_FALSE(g.factor_stale());
  g.update(Eigen::Vector2d(0.6, 0.0));
  EXPECT_TRUE(g.factor_stale());
}

TEST(RidgeSolveTest, ZeroMomentGivesZeroWeights) {
  GramState g(3, 1.0);
  g.update(Eigen::Vector3d(0.5, 0.5, 0));
  EXPECT_EQ(ridge_solve(g, Eigen::Vector3d::Zero()).theta, Eigen::Vector3d::Zero());
}

TEST(RidgeSolveTest, ScalarRidgeClosedForm) {
  GramState g(3, 1.0);
  const Eigen::Vector3d e1(1, 0, 0);
  g.update(e1);
  const WeightVector w = ridge_solve(g, e1 * 1.0);
  EXPECT_DOUBLE_EQ(w.theta(0), 0.5);
  EXPECT_EQ(w.theta(1), 0.0);
  EXPECT_FALSE(w.perturbation.has_value());
}

TEST(RidgeSolveTest, MatchesDenseQrOracle) {
  Fixture f = make_fixture(3, 5, 1.0, 3);
  const Eigen::VectorXd theta = ridge_solve(f.gram, f.data.moment()).theta;
  EXPECT_LE((theta - oracle::ridge_qr(f.rows, f.data.targets, 1.0)).norm(), 1e-10);
}

TEST(RidgeSolveTest, ShermanMorrisonAgreesWithRefactorizationOnRandomFixtures) {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + static_cast<int>(gen() % 20);
    const int k = static_cast<int>(gen() % 201);
    Fixture f = make_fixture(d, k, 1.0, 100 + rep);
    const Eigen::VectorXd theta = ridge_solve(f.gram, f.data.moment()).theta;
    const Eigen::VectorXd dense = oracle::ridge_qr(f.rows, f.data.targets, 1.0);
    ASSERT_LE((theta - dense).cwiseAbs().maxCoeff(), 1e-10) << "d=" << d << " k=" << k;
  }
}

TEST(GramAlgebraTest, LeverageSumIsAtMostDimension) {
  for (int rep = 0; rep < 20; ++rep) {
    Fixture f = make_fixture(5, 40 + rep, 1.0, 200 + rep);
    double total = 0.0;
    for (int t = 0; t < f.data.size(); ++t) {
      const double n = f.gram.inverse_norm(f.data.features.col(t));
      total += n * n;
    }
    EXPECT_LE(total, 5.0);
  }
}

TEST(GramAlgebraTest, EllipticPotentialBound) {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + rep % 8, k = 50 + 25 * rep;
    std::vector<Eigen::VectorXd> stream;
    for (int t = 0; t < k; ++t) stream.push_back(unit_ball_point(d, gen));
    EXPECT_LE(elliptic_potential(stream, d, 1.0), elliptic_potential_bound(d, 1.0, k));
  }
}

TEST(DirectSamplerTest, VanishingNoiseReturnsTheMean) {
  Fixture f = make_fixture(3, 5, 1.0, 6);
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  RandomStream rng(6);
  for (const WeightVector& w : sample_perturbed_weights_direct(f.gram, hat, 1e-12, 4, rng))
    EXPECT_LE((w.theta - hat.theta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(DirectSamplerTest, MomentsMatchSigmaSquaredInverseGram) {
  Fixture f = make_fixture(3, 5, 1.0, 7);
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  RandomStream rng(7);
  constexpr int kSamples = 100000;
  const double sigma = 1.0;
  const Eigen::MatrixXd draws = perturbed_weight_matrix_direct(f.gram, hat.theta, sigma, kSamples, rng);
  const Eigen::MatrixXd centered = draws.colwise() - hat.theta;
  const Eigen::MatrixXd cov = oracle::sample_covariance(centered);
  const Eigen::MatrixXd target = sigma * sigma * f.gram.inverse();
  EXPECT_LE((cov - target).norm() / target.norm(), 0.05);
  const Eigen::VectorXd mean = draws.rowwise().mean();
  for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(mean(i) - hat.theta(i)), 4.0 * sigma / std::sqrt(1.0 * kSamples));
}

TEST(DirectSamplerTest, RejectsBadArguments) {
  GramState g(2, 1.0);
  RandomStream rng(0);
  const WeightVector hat{Eigen::Vector2d::Zero(), std::nullopt};
  EXPECT_THROW(sample_perturbed_weights_direct(g, hat, 0.0, 1, rng), InputError);
  EXPECT_THROW(sample_perturbed_weights_direct(g, hat, 1.0, 0, rng), InputError);
}

TEST(RewardPerturbationSamplerTest, EmptyHistoryIsPriorNoise) {
  const double lambda = 2.0, sigma = 0.5;
  GramState g(3, lambda);
  RegressionTargetSet empty{Eigen::MatrixXd(3, 0), Eigen::VectorXd(0)};
  RandomStream rng(8);
  constexpr int kSamples = 100000;
  const Eigen::MatrixXd draws = perturbed_weight_matrix_via_rewards(g, empty, sigma, kSamples, rng);
  const Eigen::MatrixXd cov = oracle::sample_covariance(draws);
  const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(3, 3) * sigma * sigma / lambda;
  EXPECT_LE((cov - target).norm() / target.norm(), 0.05);
}

TEST(RewardPerturbationSamplerTest, ReturnsMDistinctVectors) {
  Fixture f = make_fixture(3, 5, 1.0, 9);
  RandomStream rng(9);
  const auto ws = sample_perturbed_weights_via_rewards(f.gram, f.data, 1.0, 3, rng);
  ASSERT_EQ(ws.size(), 3u);
  EXPECT_NE(ws[0].theta, ws[1].theta);
  EXPECT_NE(ws[1].theta, ws[2].theta);
  EXPECT_NE(ws[0].theta, ws[2].theta);
  EXPECT_EQ(ws[2].perturbation, 2);
}

TEST(RewardPerturbationSamplerTest, RejectsInconsistentTargets) {
  Fixture f = make_fixture(3, 5, 1.0, 10);
  RegressionTargetSet short_set{f.data.features.leftCols(4), f.data.targets.head(4)};
  RandomStream rng(10);
  EXPECT_THROW(sample_perturbed_weights_via_rewards(f.gram, short_set, 1.0, 1, rng), InputError);
}

// Entrywise two-sample z-tests on the covariance, Bonferroni-corrected to 1%.
TEST(SamplerEquivalenceTest, PathsAreIndistinguishableAtOnePercent) {
  Fixture f = make_fixture(3, 5, 1.0, 11);
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  RandomStream rng_a(11), rng_b(12);
  constexpr int kSamples = 100000;
  const Eigen::MatrixXd a = perturbed_weight_matrix_direct(f.gram, hat.theta, 1.0, kSamples, rng_a).colwise() - hat.theta;
  const Eigen::MatrixXd b = perturbed_weight_matrix_via_rewards(f.gram, f.data, 1.0, kSamples, rng_b).colwise() - hat.theta;

  const int entries = 3 + 6;  // means and the upper triangle of the covariance
  // two-sided z critical value for 0.01 / entries, found by bisection on the CDF oracle
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (2.0 * (1.0 - oracle::normal_cdf(mid)) > 0.01 / entries ? lo : hi) = mid;
  }
  const double z_crit = hi;

  auto z_stat = [&](const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    const double mx = x.mean(), my = y.mean();
    const double vx = (x - mx).square().sum() / (x.size() - 1), vy = (y - my).square().sum() / (y.size() - 1);
    return (mx - my) / std::sqrt(vx / x.size() + vy / y.size());
  };
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(std::abs(z_stat(a.row(i).transpose().array(), b.row(i).transpose().array())), z_crit) << "mean " << i;
    for (int j = i; j < 3; ++j) {
      const Eigen::ArrayXd pa = a.row(i).array() * a.row(j).array();
      const Eigen::ArrayXd pb = b.row(i).array() * b.row(j).array();
      EXPECT_LT(std::abs(z_stat(pa, pb)), z_crit) << "cov " << i << "," << j;
    }
  }
}

TEST(NormalCdfTest, LibraryCdfMatchesQuadratureOracle) {
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.7, 1.0, 2.5})
    EXPECT_NEAR(standard_normal_cdf(x), oracle::normal_cdf(x), 1e-10);
  EXPECT_NEAR(oracle::normal_cdf(-1.0), 0.158655, 1e-6);
}

TEST(AnticoncentrationTest, OneSigmaExceedanceIsPhiOfMinusOne) {
  Fixture f = make_fixture(3, 5, 1.0, 12);
  RandomStream rng(12);
  const double rate = anticoncentration_rate(f.gram, f.data.features.col(0), 1.0, 100000, rng);
  EXPECT_NEAR(rate, oracle::normal_cdf(-1.0), 0.01);
}

TEST(AnticoncentrationTest, ZeroMarginIsAFairCoin) {
  Fixture f = make_fixture(3, 5, 1.0, 13);
  RandomStream rng(13);
  EXPECT_NEAR(anticoncentration_rate(f.gram, f.data.features.col(1), 0.3, 100000, rng, 0.0), 0.5, 0.01);
}

TEST(AnticoncentrationTest, MaxOverMBoostsOptimism) {
  Fixture f = make_fixture(3, 5, 1.0, 14);
  const WeightVector hat = ridge_solve(f.gram, f.data.moment());
  const double v = oracle::normal_cdf(-1.0);
  for (int m : {1, 2, 4, 8}) {
    RandomStream rng(14 + m);
    const double rate = exceedance_rate(f.gram, hat.theta, f.data.features.col(2), 1.0, m, 1.0, 50000, rng);
    EXPECT_GE(rate, 1.0 - std::pow(1.0 - v, m) - 0.01) << "M=" << m;
  }
}

TEST(AnticoncentrationTest, TooFewSamplesIsAnInputError) {
  GramState g(2, 1.0);
  RandomStream rng(0);
  EXPECT_THROW(anticoncentration_rate(g, Eigen::Vector2d(1, 0), 1.0, 100, rng), InputError);
}

}  // namespace
}  // namespace phe
