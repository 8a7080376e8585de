#pragma once

#include <penest/highway.hpp>
#include <penest/ltv.hpp>
#include <penest/metanet.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace penest {

/// Tuning and initialization of the inverse-share filter.
struct KalmanConfig {
  Matrix q_cov; // process covariance Q, N x N
  double r_cov; // measurement covariance R (single output)
  Vector x0;    // initial estimate μ
  Matrix p0;    // initial covariance H

  KalmanConfig(Matrix q, double r, Vector x0_in, Matrix p0_in)
      : q_cov(std::move(q)), r_cov(r), x0(std::move(x0_in)), p0(std::move(p0_in)) {
    validate();
  }

  /// Q = σI, R, μ = (m, ..., m), H = hI.
  static KalmanConfig isotropic(int n, double sigma, double r, double mu, double h) {
    return KalmanConfig(sigma * Matrix::Identity(n, n), r, Vector::Constant(n, mu), h * Matrix::Identity(n, n));
  }

  int size() const { return static_cast<int>(x0.size()); }

 private:
  static void require_spd(const Matrix& m, Eigen::Index n, const char* what) {
    if (m.rows() != n || m.cols() != n) {
      throw std::invalid_argument(std::string("kalman: ") + what + " has wrong shape");
    }
    if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12)) {
      throw std::invalid_argument(std::string("kalman: ") + what + " must be symmetric");
    }
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument(std::string("kalman: ") + what + " must be positive definite");
    }
  }

  void validate() const {
    const Eigen::Index n = x0.size();
    if (n < 1 || !x0.allFinite()) {
      throw std::invalid_argument("kalman: initial estimate must be non-empty and finite");
    }
    if (!(r_cov > 0.0) || !std::isfinite(r_cov)) {
      throw std::invalid_argument("kalman: measurement covariance must be > 0");
    }
    require_spd(q_cov, n, "Q");
    require_spd(p0, n, "H");
  }
};

/// Estimate x̂(k) of p̄, its covariance P(k), and the gain K and innovation
/// produced by the step that led here.
struct FilterState {
  Vector x_hat;
  Matrix p_cov;
  Vector k_gain;
  double innovation = 0.0;

  static FilterState initial(const KalmanConfig& cfg) {
    return FilterState{cfg.x0, cfg.p0, Vector::Zero(cfg.size()), 0.0};
  }
};

/// One predictor-form step with the innovation injected through A(k):
///   K = P Cᵀ (C P Cᵀ + R)⁻¹
///   x̂⁺ = A x̂ + B u + A K (z - C x̂)
///   P⁺ = A (I - K C) P Aᵀ + Q, then symmetrized.
inline FilterState filter_step(const FilterState& fs, const LtvSystem& sys, double z, const KalmanConfig& cfg) {
  const Eigen::Index n = fs.x_hat.size();
  if (sys.size() != n || cfg.size() != n) {
    throw std::invalid_argument("filter_step: dimension mismatch");
  }
  if (!std::isfinite(z)) {
    throw NumericalFault("filter_step: non-finite measurement");
  }
  const Vector& c = sys.c_vec;
  const Vector pc = fs.p_cov * c;
  const double innovation_var = c.dot(pc) + cfg.r_cov;

  FilterState next;
  next.k_gain = pc / innovation_var;
  next.innovation = z - c.dot(fs.x_hat);
  next.x_hat = sys.a_mat * (fs.x_hat + next.k_gain * next.innovation) + sys.b_mat * sys.u_vec;
  const Matrix updated = (Matrix::Identity(n, n) - next.k_gain * c.transpose()) * fs.p_cov;
  const Matrix p = sys.a_mat * updated * sys.a_mat.transpose() + cfg.q_cov;
  next.p_cov = 0.5 * (p + p.transpose());

  if (!next.x_hat.allFinite() || !next.p_cov.allFinite()) {
    throw NumericalFault("filter_step: non-finite estimate or covariance");
  }
  return next;
}

struct OutputSample {
  double z = 0.0;
  bool held = false;
};

/// z = measured total exit flow / connected exit flow. When the connected exit
/// flow is at or below the floor the previous value is held.
inline OutputSample output_measurement(const MeasurementFrame& frame, double last_z) {
  const double q_a_exit = frame.q_a_seg[frame.size() - 1];
  if (!(q_a_exit > kDensityFloor)) {
    return OutputSample{last_z, true};
  }
  return OutputSample{frame.qN_meas / q_a_exit, false};
}

struct Totals {
  Vector rho_hat; // veh/km
  Vector q_hat;   // veh/h
};

/// ρ̂_i = ρ^a_i p̄̂_i and q̂_i = q^a_i p̄̂_i.
inline Totals reconstruct_totals(const Vector& x_hat, const MeasurementFrame& frame) {
  return Totals{frame.rho_a_seg.cwiseProduct(x_hat), frame.q_a_seg.cwiseProduct(x_hat)};
}

/// Reporting view: p̄ is at least 1 physically. The filter itself never clamps.
inline Vector physical_view(const Vector& x_hat) { return x_hat.cwiseMax(1.0); }

}  // namespace penest
