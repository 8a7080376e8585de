#pragma once

#include <penest/highway.hpp>
#include <penest/metanet.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace penest {

/// One step of the linear time-varying model of the inverse connected share
///   x(k+1) = A(k) x(k) + B(k) u(k),   y(k) = C x(k),   x = (p̄_1, ..., p̄_N).
struct LtvSystem {
  Matrix a_mat; // N x N, lower bidiagonal
  Matrix b_mat; // N x (N+1)
  Vector u_vec; // N+1
  Vector c_vec; // N, selects the last segment
  Vector g_vec; // N, predicted connected densities (denominators)
  int clamp_count = 0;

  int size() const { return static_cast<int>(a_mat.rows()); }

  Vector propagate(const Vector& x) const { return a_mat * x + b_mat * u_vec; }
};

struct Denominators {
  Vector g;
  int clamped = 0;
};

namespace detail {

inline void check_frame(const MeasurementFrame& f, int n) {
  if (f.q_a_seg.size() != n || f.rho_a_seg.size() != n || f.r_a.size() != n || f.s_a.size() != n ||
      f.r_meas.size() != n || f.s_meas.size() != n) {
    throw std::invalid_argument("measurement frame: vectors must have n_segments entries");
  }
}

inline double clamp_denominator(double g, int& counter) {
  if (g <= kDensityFloor || std::isnan(g)) {
    ++counter;
    return kDensityFloor;
  }
  return g;
}

inline Vector output_row(int n) {
  Vector c = Vector::Zero(n);
  c[n - 1] = 1.0;
  return c;
}

}  // namespace detail

/// g^a_i = ρ^a_i + (T/Δ_i)(q^a_{i-1} - q^a_i + r^a_i - s^a_i), the connected
/// density predicted for the next step. Values at or below the floor are
/// clamped and counted.
inline Denominators build_g(const MeasurementFrame& frame, const HighwayGeometry& geom) {
  const int n = geom.n_segments;
  detail::check_frame(frame, n);
  Denominators out{Vector(n), 0};
  for (int i = 0; i < n; ++i) {
    const double up_a = i == 0 ? frame.q0_a : frame.q_a_seg[i - 1];
    const double g = frame.rho_a_seg[i] +
                     geom.ratio(i) * (up_a - frame.q_a_seg[i] + frame.r_a[i] - frame.s_a[i]);
    out.g[i] = detail::clamp_denominator(g, out.clamped);
  }
  return out;
}

namespace detail {

// Shared assembly for both off-ramp variants. `pass` is the fraction of the
// upstream flow that stays on the mainline (1 - β^a_i, or 1 when off-ramp
// flows are measured directly).
inline LtvSystem assemble(const MeasurementFrame& frame, const HighwayGeometry& geom, const Denominators& den,
                          const Vector& pass) {
  const int n = geom.n_segments;
  LtvSystem sys;
  sys.a_mat = Matrix::Zero(n, n);
  sys.b_mat = Matrix::Zero(n, n + 1);
  sys.c_vec = output_row(n);
  sys.g_vec = den.g;
  sys.clamp_count = den.clamped;
  for (int i = 0; i < n; ++i) {
    const double ratio = geom.ratio(i);
    const double g = den.g[i];
    sys.a_mat(i, i) = (frame.rho_a_seg[i] - ratio * frame.q_a_seg[i]) / g;
    if (i > 0) {
      sys.a_mat(i, i - 1) = ratio * pass[i] * frame.q_a_seg[i - 1] / g;
    }
    sys.b_mat(i, i + 1) = ratio / g;
  }
  sys.b_mat(0, 0) = geom.ratio(0) * pass[0] / den.g[0];
  return sys;
}

}  // namespace detail

/// Realization with measured total off-ramp flows:
/// u = [q_0, r_1 - s_1, ..., r_N - s_N].
inline LtvSystem build_system_measured(const MeasurementFrame& frame, const HighwayGeometry& geom) {
  const int n = geom.n_segments;
  LtvSystem sys = detail::assemble(frame, geom, build_g(frame, geom), Vector::Ones(n));
  sys.u_vec.resize(n + 1);
  sys.u_vec[0] = frame.q0_meas;
  sys.u_vec.tail(n) = frame.r_meas - frame.s_meas;
  return sys;
}

/// Realization when total off-ramp flows are not measured and are instead
/// modelled as s_i = β^a_i q^a_{i-1} p̄_{i-1} (total and connected exit rates
/// assumed equal). `exit_rates_a` is dense per segment, zero where there is
/// no off-ramp. u = [q_0, r_1, ..., r_N].
inline LtvSystem build_system_unmeasured_offramps(const MeasurementFrame& frame, const HighwayGeometry& geom,
                                                  const Vector& exit_rates_a) {
  const int n = geom.n_segments;
  detail::check_frame(frame, n);
  if (exit_rates_a.size() != n) {
    throw std::invalid_argument("exit rates: one entry per segment is required");
  }
  if ((exit_rates_a.array() < 0.0).any() || (exit_rates_a.array() >= 1.0).any()) {
    throw std::invalid_argument("exit rates: values must lie in [0, 1)");
  }
  const Vector pass = Vector::Ones(n) - exit_rates_a;
  Denominators den{Vector(n), 0};
  for (int i = 0; i < n; ++i) {
    const double up_a = i == 0 ? frame.q0_a : frame.q_a_seg[i - 1];
    const double g = frame.rho_a_seg[i] + geom.ratio(i) * (pass[i] * up_a - frame.q_a_seg[i]) +
                     geom.ratio(i) * frame.r_a[i];
    den.g[i] = detail::clamp_denominator(g, den.clamped);
  }
  LtvSystem sys = detail::assemble(frame, geom, den, pass);
  sys.u_vec.resize(n + 1);
  sys.u_vec[0] = frame.q0_meas;
  sys.u_vec.tail(n) = frame.r_meas;
  return sys;
}

}  // namespace penest
