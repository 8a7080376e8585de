#pragma once

#include <penest/ltv.hpp>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace penest {

inline constexpr double kObservabilityTolerance = 1e-12;

/// Observability matrix over the window k_0 ... k_0+N-2 with a single sensor
/// at segment `sensor_segment` (1-based, default the last segment):
/// rows e_J^T, e_J^T A(k_0), e_J^T A(k_0+1) A(k_0), ...
inline Matrix observability_matrix(std::span<const LtvSystem> systems, int sensor_segment = -1) {
  if (systems.empty()) {
    throw std::invalid_argument("observability: empty system sequence");
  }
  const int n = systems.front().size();
  if (static_cast<int>(systems.size()) < n - 1) {
    throw std::invalid_argument("observability: need N-1 consecutive systems, got " +
                                std::to_string(systems.size()));
  }
  const int sensor = sensor_segment < 0 ? n : sensor_segment;
  if (sensor < 1 || sensor > n) {
    throw std::invalid_argument("observability: sensor segment out of range");
  }
  Matrix obs(n, n);
  for (int row = 0; row < n; ++row) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r[sensor - 1] = 1.0;
    for (int m = row - 1; m >= 0; --m) {
      r = r * systems[m].a_mat;
    }
    obs.row(row) = r;
  }
  return obs;
}

/// Entries O(j, N-1-j), top to bottom.
inline Vector anti_diagonal(const Matrix& obs) {
  const Eigen::Index n = obs.rows();
  Vector d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = obs(j, n - 1 - j);
  }
  return d;
}

/// Determinant by LU factorization, independent of the triangular structure.
inline double observability_determinant(const Matrix& obs) { return obs.partialPivLu().determinant(); }

/// Columns whose every entry is exactly zero.
inline int zero_columns(const Matrix& obs) {
  int count = 0;
  for (Eigen::Index c = 0; c < obs.cols(); ++c) {
    if ((obs.col(c).array() == 0.0).all()) {
      ++count;
    }
  }
  return count;
}

struct ObservabilityReport {
  bool observable = false;
  Vector anti_diagonal;
  double min_abs_anti_diagonal = 0.0;
  double log10_abs_det = 0.0; // from the anti-diagonal product, immune to underflow
  bool upstream_sensor_blind = false; // every J < N loses exactly N-J columns
};

inline ObservabilityReport check_observability(std::span<const LtvSystem> systems) {
  const Matrix obs = observability_matrix(systems);
  const int n = static_cast<int>(obs.rows());
  ObservabilityReport rep;
  rep.anti_diagonal = anti_diagonal(obs);
  rep.min_abs_anti_diagonal = rep.anti_diagonal.cwiseAbs().minCoeff();
  rep.observable = rep.min_abs_anti_diagonal > kObservabilityTolerance;
  rep.log10_abs_det = 0.0;
  for (Eigen::Index j = 0; j < rep.anti_diagonal.size(); ++j) {
    rep.log10_abs_det += std::log10(std::abs(rep.anti_diagonal[j]));
  }
  rep.upstream_sensor_blind = true;
  for (int sensor = 1; sensor < n; ++sensor) {
    if (zero_columns(observability_matrix(systems, sensor)) != n - sensor) {
      rep.upstream_sensor_blind = false;
    }
  }
  return rep;
}

}  // namespace penest
