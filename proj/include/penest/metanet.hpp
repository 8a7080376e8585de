#pragma once

#include <penest/highway.hpp>
#include <penest/noise.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace penest {

/// Standard deviations of detector (measurement) and model (process) noise.
struct NoiseSpec {
  double std_entry_flow = 25.0;  // γ_0^q, γ_N^q, veh/h
  double std_onramp = 10.0;      // γ^r, veh/h
  double std_offramp = 5.0;      // γ^s, veh/h
  double std_speed = 5.0;        // ξ^v, km/h
  double std_flow_proc = 25.0;   // ξ^q, veh/h
  double std_flow_proc_a = 15.0; // ξ^{q^a}, veh/h
  std::uint64_t seed = 1;

  static NoiseSpec none(std::uint64_t seed = 1) { return NoiseSpec{0, 0, 0, 0, 0, 0, seed}; }

  bool is_zero() const {
    return std_entry_flow == 0.0 && std_onramp == 0.0 && std_offramp == 0.0 && std_speed == 0.0 &&
           std_flow_proc == 0.0 && std_flow_proc_a == 0.0;
  }

  void validate() const {
    const double all[] = {std_entry_flow, std_onramp, std_offramp, std_speed, std_flow_proc, std_flow_proc_a};
    for (double d : all) {
      if (!(d >= 0.0) || !std::isfinite(d)) {
        throw std::invalid_argument("noise: standard deviations must be finite and >= 0");
      }
    }
  }
};

/// Everything the estimator may see at one step. Connected-vehicle aggregates
/// are exact; the detector flows carry additive noise.
struct MeasurementFrame {
  Vector q_a_seg;   // connected flow per segment
  Vector rho_a_seg; // connected density per segment
  double q0_a = 0.0;
  Vector r_a, s_a;
  double q0_meas = 0.0;
  double qN_meas = 0.0;
  Vector r_meas, s_meas;

  int size() const { return static_cast<int>(q_a_seg.size()); }
};

namespace detail {

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw NumericalFault(std::string("non-finite value in ") + what);
  }
}

inline void check_state(const TrafficState& s, int n) {
  if (s.rho.size() != n || s.rho_a.size() != n || s.v.size() != n || s.q.size() != n || s.q_a.size() != n) {
    throw std::invalid_argument("traffic state: vectors must have n_segments entries");
  }
  require_finite(s.rho, "rho");
  require_finite(s.rho_a, "rho_a");
  require_finite(s.v, "v");
  require_finite(s.q, "q");
  require_finite(s.q_a, "q_a");
  if ((s.rho.array() < 0.0).any() || (s.v.array() < 0.0).any() || (s.rho_a.array() < 0.0).any()) {
    throw std::invalid_argument("traffic state: densities and speeds must be non-negative");
  }
}

inline void check_inputs(const BoundaryInputs& in, int n) {
  if (in.r.size() != n || in.r_a.size() != n || in.s.size() != n || in.s_a.size() != n) {
    throw std::invalid_argument("boundary inputs: vectors must have n_segments entries");
  }
  if (!std::isfinite(in.q0) || !std::isfinite(in.q0_a)) {
    throw NumericalFault("non-finite entry flow");
  }
}

}  // namespace detail

/// Fills s, s^a from the exit rates applied to the upstream flows of `state`
/// (s_i = β_i q_{i-1}, s^a_i = β^a_i q^a_{i-1}; q_0 is the entry flow).
inline BoundaryInputs with_exit_flows(BoundaryInputs inputs, const TrafficState& state, const RampLayout& ramps) {
  const int n = state.size();
  inputs.s = Vector::Zero(n);
  inputs.s_a = Vector::Zero(n);
  for (std::size_t j = 0; j < ramps.off_ramp_segments.size(); ++j) {
    const int i = ramps.off_ramp_segments[j] - 1;
    const double up = i == 0 ? inputs.q0 : state.q[i - 1];
    const double up_a = i == 0 ? inputs.q0_a : state.q_a[i - 1];
    inputs.s[i] = ramps.exit_rate[j] * up;
    inputs.s_a[i] = ramps.exit_rate_a[j] * up_a;
  }
  return inputs;
}

/// Advances the ground truth by one step.
///
/// Densities follow the discrete conservation law for total and connected
/// vehicles. The speed follows the second-order relaxation/convection/
/// anticipation/merging dynamics with v_0 = v_1 and ρ_{N+1} = ρ_N, perturbed
/// by ξ^v. Flows are ρv and ρ^a v perturbed by ξ^q and ξ^{q^a}. Process noise
/// for the transition k -> k+1 is drawn from the stream keyed by `step` = k.
inline TrafficState step_truth(const TrafficState& state, const BoundaryInputs& inputs, const HighwayGeometry& geom,
                               const MetanetParams& params, const NoiseSpec& noise, std::uint64_t step) {
  const int n = geom.n_segments;
  detail::check_state(state, n);
  detail::check_inputs(inputs, n);

  TrafficState next{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n)};
  for (int i = 0; i < n; ++i) {
    const double ratio = geom.ratio(i);
    const double q_up = i == 0 ? inputs.q0 : state.q[i - 1];
    const double q_up_a = i == 0 ? inputs.q0_a : state.q_a[i - 1];
    next.rho[i] = state.rho[i] + ratio * (q_up - state.q[i] + inputs.r[i] - inputs.s[i]);
    next.rho_a[i] = state.rho_a[i] + ratio * (q_up_a - state.q_a[i] + inputs.r_a[i] - inputs.s_a[i]);
  }

  NoiseStream rng(noise.seed, NoiseChannel::kProcess, step);
  const double relax = geom.step_h / params.tau_h;
  for (int i = 0; i < n; ++i) {
    const double ratio = geom.ratio(i);
    const double rho = state.rho[i];
    const double v = state.v[i];
    const double v_up = i == 0 ? state.v[0] : state.v[i - 1];
    const double rho_down = i == n - 1 ? state.rho[n - 1] : state.rho[i + 1];
    const double denom = rho + params.kappa;
    double v_next = v + relax * (nominal_speed(rho, params) - v) + ratio * v * (v_up - v) -
                    params.nu * geom.step_h / (params.tau_h * geom.seg_len_km[i]) * (rho_down - rho) / denom -
                    params.delta_ramp * ratio * inputs.r[i] * v / denom;
    v_next += rng.normal(noise.std_speed);
    next.v[i] = std::clamp(v_next, 0.0, 1.5 * params.v_free);
  }

  for (int i = 0; i < n; ++i) {
    next.rho[i] = std::max(next.rho[i], 0.0);
    next.rho_a[i] = std::clamp(next.rho_a[i], 0.0, next.rho[i]);
  }

  for (int i = 0; i < n; ++i) {
    const double xi_q = rng.normal(noise.std_flow_proc);
    const double xi_qa = rng.normal(noise.std_flow_proc_a);
    next.q[i] = std::max(next.rho[i] * next.v[i] + xi_q, 0.0);
    next.q_a[i] = std::clamp(next.rho_a[i] * next.v[i] + xi_qa, 0.0, next.q[i]);
  }

  detail::require_finite(next.rho, "rho");
  detail::require_finite(next.v, "v");
  return next;
}

/// Detector and connected-vehicle readings at step `step`. Ramp detector noise
/// is applied only at segments that actually host the ramp.
inline MeasurementFrame observe(const TrafficState& state, const BoundaryInputs& inputs, const RampLayout& ramps,
                                const NoiseSpec& noise, std::uint64_t step) {
  const int n = state.size();
  detail::check_inputs(inputs, n);
  NoiseStream rng(noise.seed, NoiseChannel::kMeasurement, step);

  MeasurementFrame frame;
  frame.q_a_seg = state.q_a;
  frame.rho_a_seg = state.rho_a;
  frame.q0_a = inputs.q0_a;
  frame.r_a = inputs.r_a;
  frame.s_a = inputs.s_a;
  frame.q0_meas = std::max(inputs.q0 + rng.normal(noise.std_entry_flow), 0.0);
  frame.qN_meas = std::max(state.q[n - 1] + rng.normal(noise.std_entry_flow), 0.0);
  frame.r_meas = inputs.r;
  frame.s_meas = inputs.s;
  for (int i = 0; i < n; ++i) {
    const double gamma_r = rng.normal(noise.std_onramp);
    const double gamma_s = rng.normal(noise.std_offramp);
    if (ramps.has_on_ramp(i + 1)) {
      frame.r_meas[i] = std::max(inputs.r[i] + gamma_r, 0.0);
    }
    if (ramps.has_off_ramp(i + 1)) {
      frame.s_meas[i] = std::max(inputs.s[i] + gamma_s, 0.0);
    }
  }
  return frame;
}

/// Free-flow density carrying flow q on the uncongested branch of V.
inline double free_flow_density(double q, const MetanetParams& params) {
  const double capacity = params.rho_crit * nominal_speed(params.rho_crit, params);
  if (q < 0.0 || q > capacity) {
    throw std::domain_error("free_flow_density: flow outside [0, capacity]");
  }
  double lo = 0.0;
  double hi = params.rho_crit;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid * nominal_speed(mid, params) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Stationary free-flow state for the given boundary flows: each segment
/// carries the upstream flow plus on-ramp inflow minus exits, at speed V(ρ).
inline TrafficState equilibrium_state(const BoundaryInputs& inputs, const RampLayout& ramps,
                                      const HighwayGeometry& geom, const MetanetParams& params) {
  const int n = geom.n_segments;
  const Vector beta = ramps.dense_exit_rates(n, false);
  const Vector beta_a = ramps.dense_exit_rates(n, true);
  TrafficState st{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n)};
  double up = inputs.q0;
  double up_a = inputs.q0_a;
  for (int i = 0; i < n; ++i) {
    const double q = (1.0 - beta[i]) * up + inputs.r[i];
    const double q_a = (1.0 - beta_a[i]) * up_a + inputs.r_a[i];
    st.rho[i] = free_flow_density(q, params);
    st.v[i] = nominal_speed(st.rho[i], params);
    st.rho_a[i] = std::min(q_a / st.v[i], st.rho[i]);
    up = q;
    up_a = q_a;
  }
  const Flows f = flows_from_state(st.rho, st.rho_a, st.v);
  st.q = f.q;
  st.q_a = f.q_a;
  return st;
}

}  // namespace penest
