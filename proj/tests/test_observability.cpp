#include <gtest/gtest.h>

#include "test_support.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace {

using namespace penest;
using penest::testing::random_frame;
using penest::testing::table_geometry;

std::vector<LtvSystem> random_sequence(int n, std::mt19937_64& rng) {
  std::vector<LtvSystem> seq;
  for (int k = 0; k < n - 1; ++k) {
    seq.push_back(build_system_measured(random_frame(n, rng), table_geometry(n)));
  }
  return seq;
}

// Row j of O starts at e_N and walks one segment upstream per step, so its
// anti-diagonal entry is a chain of subdiagonal entries taken at successive
// times.
double chained_subdiagonals(const std::vector<LtvSystem>& seq, int n, int row) {
  double prod = 1.0;
  for (int t = 0; t < row; ++t) {
    prod *= seq[row - 1 - t].a_mat(n - 1 - t, n - 2 - t);
  }
  return prod;
}

TEST(Observability, TwoSegmentDeterminant) {
  LtvSystem sys;
  sys.a_mat = (Matrix(2, 2) << 0.7, 0.0, 0.25, 0.6).finished();
  const std::vector<LtvSystem> seq{sys};
  const Matrix obs = observability_matrix(seq);
  EXPECT_EQ(obs, (Matrix(2, 2) << 0.0, 1.0, 0.25, 0.6).finished());
  EXPECT_DOUBLE_EQ(observability_determinant(obs), -0.25);
}

TEST(Observability, BrokenChainIsUnobservable) {
  std::mt19937_64 rng(41);
  const int n = 6;
  std::vector<LtvSystem> seq = random_sequence(n, rng);
  seq[1].a_mat(4, 3) = 0.0;  // row 2 walks through a_{5,4}(k_0+1)
  const Matrix obs = observability_matrix(seq);
  EXPECT_EQ(observability_determinant(obs), 0.0);
  EXPECT_FALSE(check_observability(seq).observable);
}

TEST(Observability, DeterminantIsAntiDiagonalProduct) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 19;
    const std::vector<LtvSystem> seq = random_sequence(n, rng);
    const Matrix obs = observability_matrix(seq);

    // Strictly above the anti-diagonal everything vanishes.
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n - 1 - r; ++c) EXPECT_EQ(obs(r, c), 0.0);
    }
    double product = 1.0;
    for (int r = 0; r < n; ++r) {
      const double expected = chained_subdiagonals(seq, n, r);
      EXPECT_NEAR(obs(r, n - 1 - r), expected, 1e-14 * std::abs(expected));
      product *= expected;
    }
    const double det = observability_determinant(obs);
    const double sign = (n * (n - 1) / 2) % 2 == 0 ? 1.0 : -1.0;
    EXPECT_NE(det, 0.0);
    EXPECT_NEAR(det, sign * product, 1e-9 * std::abs(product)) << "n=" << n;
  }
}

TEST(Observability, UpstreamSensorLosesDownstreamSegments) {
  std::mt19937_64 rng(47);
  const int n = 9;
  const std::vector<LtvSystem> seq = random_sequence(n, rng);
  for (int sensor = 1; sensor < n; ++sensor) {
    const Matrix obs = observability_matrix(seq, sensor);
    EXPECT_EQ(zero_columns(obs), n - sensor) << sensor;
    // The lost columns are exactly the segments downstream of the sensor.
    for (int c = sensor; c < n; ++c) EXPECT_TRUE(obs.col(c).isZero());
  }
  EXPECT_EQ(zero_columns(observability_matrix(seq)), 0);
  EXPECT_TRUE(check_observability(seq).upstream_sensor_blind);
}

TEST(Observability, ReportIsConsistent) {
  std::mt19937_64 rng(53);
  const int n = 20;
  const std::vector<LtvSystem> seq = random_sequence(n, rng);
  const ObservabilityReport rep = check_observability(seq);
  const double det = observability_determinant(observability_matrix(seq));
  EXPECT_TRUE(rep.observable);
  EXPECT_NEAR(rep.log10_abs_det, std::log10(std::abs(det)), 1e-9);
  EXPECT_EQ(rep.min_abs_anti_diagonal, rep.anti_diagonal.cwiseAbs().minCoeff());
}

TEST(Observability, WindowTooShort) {
  std::mt19937_64 rng(59);
  std::vector<LtvSystem> seq = random_sequence(5, rng);
  seq.pop_back();
  EXPECT_THROW(observability_matrix(seq), std::invalid_argument);
  EXPECT_THROW(observability_matrix(std::vector<LtvSystem>{}), std::invalid_argument);
  EXPECT_THROW(observability_matrix(random_sequence(5, rng), 6), std::invalid_argument);
}

TEST(Observability, DefaultRunStaysObservable) {
  Scenario sc;
  sc.horizon_h = 0.5;
  const TruthRun run = generate_truth(sc);
  const auto windows = observability_over_run(sc, run, 10);
  ASSERT_FALSE(windows.empty());
  for (const auto& w : windows) EXPECT_TRUE(w.observable) << "k0=" << w.k0;
}

}  // namespace
