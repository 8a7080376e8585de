#pragma once

#include <penest/highway.hpp>
#include <penest/kalman.hpp>
#include <penest/ltv.hpp>
#include <penest/metanet.hpp>
#include <penest/observability.hpp>
#include <penest/scenario.hpp>

#include <chrono>
#include <cmath>
#include <future>
#include <span>
#include <stdexcept>
#include <vector>

namespace penest {

/// Ground truth and what the estimator observes, steps 0..M.
struct TruthRun {
  std::vector<TrafficState> states;     // M+1
  std::vector<BoundaryInputs> inputs;   // M+1, off-ramp flows resolved
  std::vector<MeasurementFrame> frames; // M+1

  int steps() const { return static_cast<int>(states.size()) - 1; }
};

/// Filter output, steps 0..M.
struct EstimateRun {
  std::vector<Vector> x_hat;      // M+1
  std::vector<double> z;          // M+1
  std::vector<double> innovation; // M+1, z(k) - C x̂(k)
  std::vector<double> gain_norm;  // M+1, |K(k)|; the entry at M is zero
  std::vector<double> min_cov_eigenvalue; // M+1
  std::vector<double> cov_asymmetry;      // M+1, max |P - Pᵀ|
  int g_clamps = 0;
  int z_holds = 0;
};

struct RunResult {
  TruthRun truth;
  EstimateRun estimate;
  double p_r = 0.0;
  double runtime_s = 0.0;
};

/// Simulates the scenario once, producing states, inputs and frames for every step.
inline TruthRun generate_truth(const Scenario& sc) {
  const int m = sc.steps();
  TruthRun run;
  run.states.reserve(m + 1);
  run.inputs.reserve(m + 1);
  run.frames.reserve(m + 1);
  run.states.push_back(equilibrium_state(sc.demand_at(0), sc.ramps, sc.geometry, sc.metanet));
  for (int k = 0; k <= m; ++k) {
    const BoundaryInputs in = with_exit_flows(sc.demand_at(k), run.states[k], sc.ramps);
    run.inputs.push_back(in);
    run.frames.push_back(observe(run.states[k], in, sc.ramps, sc.noise, static_cast<std::uint64_t>(k)));
    if (k < m) {
      run.states.push_back(step_truth(run.states[k], in, sc.geometry, sc.metanet, sc.noise, static_cast<std::uint64_t>(k)));
    }
  }
  return run;
}

inline LtvSystem build_system(const Scenario& sc, const MeasurementFrame& frame) {
  if (sc.offramp_mode == OffRampMode::kMeasured) {
    return build_system_measured(frame, sc.geometry);
  }
  return build_system_unmeasured_offramps(frame, sc.geometry, sc.ramps.dense_exit_rates(sc.geometry.n_segments, true));
}

/// Runs the filter over a precomputed truth. The frame at step k builds
/// A(k), B(k), u(k) and z(k).
inline EstimateRun run_filter(const Scenario& sc, const TruthRun& truth, const KalmanConfig& cfg) {
  const int m = truth.steps();
  const int n = sc.geometry.n_segments;
  EstimateRun est;
  est.x_hat.reserve(m + 1);

  FilterState fs = FilterState::initial(cfg);
  if (sc.filter.init_from_truth) {
    fs.x_hat = inverse_penetration(truth.states[0].rho, truth.states[0].rho_a);
  }
  double last_z = fs.x_hat[n - 1];
  auto record_cov = [&est](const Matrix& p) {
    est.cov_asymmetry.push_back((p - p.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p, Eigen::EigenvaluesOnly);
    est.min_cov_eigenvalue.push_back(eig.eigenvalues().minCoeff());
  };

  for (int k = 0; k <= m; ++k) {
    const OutputSample out = output_measurement(truth.frames[k], last_z);
    est.z_holds += out.held ? 1 : 0;
    last_z = out.z;
    est.z.push_back(out.z);
    est.x_hat.push_back(fs.x_hat);
    record_cov(fs.p_cov);
    if (k == m) {
      est.innovation.push_back(out.z - fs.x_hat[n - 1]);
      est.gain_norm.push_back(0.0);
      break;
    }
    const LtvSystem sys = build_system(sc, truth.frames[k]);
    est.g_clamps += sys.clamp_count;
    fs = filter_step(fs, sys, out.z, cfg);
    est.innovation.push_back(fs.innovation);
    est.gain_norm.push_back(fs.k_gain.norm());
  }
  return est;
}

/// Relative RMS density error normalized by the mean density, both averaged
/// over every sample actually summed (k = 0..M, i = 1..N):
///   sqrt(ΣΣ (ρ_i(k) - ρ^a_i(k) p̄̂_i(k))² / S) / (ΣΣ ρ_i(k) / S),  S = (M+1)N.
inline double performance_index(std::span<const Vector> truth_rho, std::span<const Vector> rho_a,
                                std::span<const Vector> x_hat) {
  if (truth_rho.size() < 2 || truth_rho.size() != rho_a.size() || truth_rho.size() != x_hat.size()) {
    throw std::invalid_argument("performance_index: series must have equal length M+1 >= 2");
  }
  const double samples = static_cast<double>(truth_rho.size() * truth_rho.front().size());
  double sq = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < truth_rho.size(); ++k) {
    sq += (truth_rho[k] - rho_a[k].cwiseProduct(x_hat[k])).squaredNorm();
    total += truth_rho[k].sum();
  }
  const double mean = total / samples;
  if (!(mean > 0.0)) {
    throw std::domain_error("performance_index: mean density is zero");
  }
  return std::sqrt(sq / samples) / mean;
}

inline double performance_index(const TruthRun& truth, const EstimateRun& est) {
  std::vector<Vector> rho, rho_a;
  rho.reserve(truth.states.size());
  rho_a.reserve(truth.states.size());
  for (const auto& s : truth.states) {
    rho.push_back(s.rho);
    rho_a.push_back(s.rho_a);
  }
  return performance_index(rho, rho_a, est.x_hat);
}

inline RunResult run_experiment(const Scenario& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.truth = generate_truth(sc);
  res.estimate = run_filter(sc, res.truth, sc.kalman_config());
  res.p_r = performance_index(res.truth, res.estimate);
  res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct SweepPoint {
  double sigma = 0.0;
  double p_r = 0.0;
};

/// Reruns the filter with Q = σI for each σ against one shared truth.
inline std::vector<SweepPoint> q_sweep(const Scenario& sc, const TruthRun& truth, const std::vector<double>& sigmas) {
  for (double s : sigmas) {
    if (!(s > 0.0)) throw std::invalid_argument("q_sweep: every sigma must be > 0");
  }
  std::vector<std::future<double>> jobs;
  jobs.reserve(sigmas.size());
  for (double s : sigmas) {
    jobs.push_back(std::async(std::launch::async, [&sc, &truth, s] {
      return performance_index(truth, run_filter(sc, truth, sc.kalman_config(s)));
    }));
  }
  std::vector<SweepPoint> out;
  out.reserve(sigmas.size());
  for (std::size_t j = 0; j < sigmas.size(); ++j) out.push_back({sigmas[j], jobs[j].get()});
  return out;
}

inline std::vector<SweepPoint> q_sweep(const Scenario& sc, const std::vector<double>& sigmas) {
  return q_sweep(sc, generate_truth(sc), sigmas);
}

struct ObservabilityWindow {
  int k0 = 0;
  bool observable = false;
  double min_abs_anti_diagonal = 0.0;
  double log10_abs_det = 0.0;
};

/// Observability of the filter's model over windows starting every `stride`
/// steps; each window uses the N-1 systems built from frames k_0..k_0+N-2.
inline std::vector<ObservabilityWindow> observability_over_run(const Scenario& sc, const TruthRun& truth, int stride) {
  if (stride < 1) throw std::invalid_argument("observability: stride must be >= 1");
  const int n = sc.geometry.n_segments;
  const int m = truth.steps();
  std::vector<LtvSystem> systems;
  systems.reserve(m);
  for (int k = 0; k < m; ++k) systems.push_back(build_system(sc, truth.frames[k]));
  std::vector<ObservabilityWindow> out;
  for (int k0 = 0; k0 + n - 1 <= m; k0 += stride) {
    const Matrix obs = observability_matrix(std::span<const LtvSystem>(systems).subspan(k0, n - 1));
    const Vector d = anti_diagonal(obs);
    ObservabilityWindow w;
    w.k0 = k0;
    w.min_abs_anti_diagonal = d.cwiseAbs().minCoeff();
    w.observable = w.min_abs_anti_diagonal > kObservabilityTolerance;
    for (Eigen::Index j = 0; j < d.size(); ++j) w.log10_abs_det += std::log10(std::abs(d[j]));
    out.push_back(w);
  }
  return out;
}

}  // namespace penest
