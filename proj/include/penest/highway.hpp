#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace penest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Floor applied to densities and denominators before any ratio is taken (veh/km).
inline constexpr double kDensityFloor = 1e-6;

/// Raised when a computation produces a non-finite value.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discretization frame: segment count, time step (h) and per-segment lengths (km).
struct HighwayGeometry {
  int n_segments = 20;
  double step_h = 10.0 / 3600.0;
  Vector seg_len_km = Vector::Constant(20, 0.5);

  static HighwayGeometry uniform(int n, double step_h, double len_km) {
    return HighwayGeometry{n, step_h, Vector::Constant(n, len_km)};
  }

  /// T / Δ_i for segment index i (0-based).
  double ratio(int i) const { return step_h / seg_len_km[i]; }

  void validate() const {
    if (n_segments < 2) {
      throw std::invalid_argument("geometry: n_segments must be >= 2");
    }
    if (!(step_h > 0.0)) {
      throw std::invalid_argument("geometry: step_h must be > 0");
    }
    if (seg_len_km.size() != n_segments) {
      throw std::invalid_argument("geometry: seg_len_km must have n_segments entries");
    }
    if (!(seg_len_km.array() > 0.0).all()) {
      throw std::invalid_argument("geometry: every segment length must be > 0");
    }
  }

  /// Courant check T·v_f <= min Δ_i. A violation is reported, not rejected.
  bool satisfies_cfl(double v_free) const { return step_h * v_free <= seg_len_km.minCoeff(); }
};

/// Second-order model constants. Times in hours, lengths in km.
struct MetanetParams {
  double tau_h = 20.0 / 3600.0;
  double nu = 35.0;
  double kappa = 13.0;
  double delta_ramp = 1.4;
  double v_free = 120.0;
  double rho_crit = 33.5;
  double alpha_exp = 1.4324;

  void validate() const {
    const std::pair<const char*, double> fields[] = {
        {"tau_h", tau_h},     {"nu", nu},           {"kappa", kappa},         {"delta_ramp", delta_ramp},
        {"v_free", v_free},   {"rho_crit", rho_crit}, {"alpha_exp", alpha_exp}};
    for (const auto& [name, value] : fields) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string("metanet: ") + name + " must be strictly positive");
      }
    }
  }
};

/// Ground-truth traffic variables at one time step, one entry per segment.
struct TrafficState {
  Vector rho;   // total density, veh/km
  Vector rho_a; // connected density, veh/km
  Vector v;     // mean speed, km/h
  Vector q;     // total flow, veh/h
  Vector q_a;   // connected flow, veh/h

  int size() const { return static_cast<int>(rho.size()); }
};

/// On/off-ramp placement. Segment numbers are 1-based.
struct RampLayout {
  std::vector<int> on_ramp_segments;
  std::vector<int> off_ramp_segments;
  std::vector<double> exit_rate;   // β_i, aligned with off_ramp_segments
  std::vector<double> exit_rate_a; // β^a_i, aligned with off_ramp_segments

  bool has_on_ramp(int segment) const {
    return std::find(on_ramp_segments.begin(), on_ramp_segments.end(), segment) != on_ramp_segments.end();
  }

  bool has_off_ramp(int segment) const {
    return std::find(off_ramp_segments.begin(), off_ramp_segments.end(), segment) != off_ramp_segments.end();
  }

  /// Dense per-segment exit rates (0-based), zero where there is no off-ramp.
  Vector dense_exit_rates(int n, bool connected) const {
    Vector out = Vector::Zero(n);
    const auto& rates = connected ? exit_rate_a : exit_rate;
    for (std::size_t j = 0; j < off_ramp_segments.size(); ++j) {
      out[off_ramp_segments[j] - 1] = rates[j];
    }
    return out;
  }

  void validate(int n) const {
    auto check_indices = [n](const std::vector<int>& idx, const char* what) {
      std::set<int> seen;
      for (int s : idx) {
        if (s < 1 || s > n) {
          throw std::invalid_argument(std::string("ramps: ") + what + " segment out of range");
        }
        if (!seen.insert(s).second) {
          throw std::invalid_argument(std::string("ramps: duplicate ") + what + " segment");
        }
      }
    };
    check_indices(on_ramp_segments, "on-ramp");
    check_indices(off_ramp_segments, "off-ramp");
    if (exit_rate.size() != off_ramp_segments.size() || exit_rate_a.size() != off_ramp_segments.size()) {
      throw std::invalid_argument("ramps: one exit rate per off-ramp is required");
    }
    for (std::size_t j = 0; j < exit_rate.size(); ++j) {
      if (exit_rate[j] < 0.0 || exit_rate[j] >= 1.0 || exit_rate_a[j] < 0.0 || exit_rate_a[j] >= 1.0) {
        throw std::invalid_argument("ramps: exit rates must lie in [0, 1)");
      }
    }
  }
};

/// Boundary flows at one step (veh/h). Per-segment vectors are 0-based.
struct BoundaryInputs {
  double q0 = 0.0;
  double q0_a = 0.0;
  Vector r, r_a;
  Vector s, s_a;

  static BoundaryInputs zeros(int n) {
    return BoundaryInputs{0.0, 0.0, Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  }
};

/// Stationary speed-density relation V(ρ) = v_f exp(-(1/α)(ρ/ρ_cr)^α).
inline double nominal_speed(double rho, const MetanetParams& params) {
  if (rho < 0.0 || std::isnan(rho)) {
    throw std::domain_error("nominal_speed: density must be non-negative");
  }
  return params.v_free * std::exp(-std::pow(rho / params.rho_crit, params.alpha_exp) / params.alpha_exp);
}

struct Flows {
  Vector q;
  Vector q_a;
};

/// q = ρ v and q^a = ρ^a v, element-wise.
inline Flows flows_from_state(const Vector& rho, const Vector& rho_a, const Vector& v) {
  if (rho.size() != rho_a.size() || rho.size() != v.size()) {
    throw std::invalid_argument("flows_from_state: length mismatch");
  }
  return Flows{rho.cwiseProduct(v), rho_a.cwiseProduct(v)};
}

/// Connected share ρ^a_i / ρ_i. Both densities are floored at kDensityFloor first;
/// a total density at or below the floor is a degenerate segment and is rejected.
inline Vector penetration(const Vector& rho, const Vector& rho_a) {
  if (rho.size() != rho_a.size()) {
    throw std::invalid_argument("penetration: length mismatch");
  }
  Vector out(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!(rho[i] > kDensityFloor)) {
      throw std::domain_error("penetration: degenerate segment " + std::to_string(i + 1) +
                              " (total density at or below floor)");
    }
    out[i] = std::max(rho_a[i], kDensityFloor) / rho[i];
  }
  return out;
}

/// Inverse share p̄_i = ρ_i / ρ^a_i, the estimator's state variable.
inline Vector inverse_penetration(const Vector& rho, const Vector& rho_a) {
  if (rho.size() != rho_a.size()) {
    throw std::invalid_argument("inverse_penetration: length mismatch");
  }
  Vector out(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    out[i] = std::max(rho[i], kDensityFloor) / std::max(rho_a[i], kDensityFloor);
  }
  return out;
}

}  // namespace penest
