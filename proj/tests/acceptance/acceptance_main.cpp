// Acceptance suite: one PASS/FAIL line per criterion. Run without arguments
// for all of them, or with a criterion number for just that one.

#include <penest/penest.hpp>

#include "../golden.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace penest;

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Scenario noise_free_default() {
  Scenario sc;
  sc.noise = NoiseSpec::none(sc.noise.seed);
  return sc;
}

// 1. The inverse-share model driven by noise-free frames tracks ρ/ρ^a of the
// simulator, for both off-ramp realizations.
Outcome model_equivalence() {
  const auto t0 = Clock::now();
  Scenario sc = noise_free_default();
  const TruthRun run = generate_truth(sc);
  double worst[2] = {0.0, 0.0};
  for (OffRampMode mode : {OffRampMode::kMeasured, OffRampMode::kUnmeasured}) {
    sc.offramp_mode = mode;
    const int idx = mode == OffRampMode::kMeasured ? 0 : 1;
    Vector x = inverse_penetration(run.states[0].rho, run.states[0].rho_a);
    for (int k = 0; k < run.steps(); ++k) {
      x = build_system(sc, run.frames[k]).propagate(x);
      const Vector truth = inverse_penetration(run.states[k + 1].rho, run.states[k + 1].rho_a);
      worst[idx] = std::max(worst[idx], (x - truth).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = run.steps() == 1080 && worst[0] < 1e-9 && worst[1] < 1e-9 && elapsed < 1.0;
  return {pass, fmt("steps=%d max_dev_measured=%.3e max_dev_unmeasured=%.3e runtime=%.3fs", run.steps(), worst[0],
                    worst[1], elapsed)};
}

// 2. Anti-triangular observability matrix: determinant equals the signed
// product of chained subdiagonal entries; an upstream sensor is blind to
// everything downstream of it.
Outcome observability() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> density(3.0, 20.0), speed(20.0, 110.0), ramp(0.0, 80.0);
  double worst_rel = 0.0;
  int zero_dets = 0, blind_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 19;
    const HighwayGeometry g = HighwayGeometry::uniform(n, 10.0 / 3600.0, 0.5);
    std::vector<LtvSystem> seq;
    for (int k = 0; k < n - 1; ++k) {
      MeasurementFrame f;
      f.rho_a_seg.resize(n);
      f.q_a_seg.resize(n);
      for (int i = 0; i < n; ++i) {
        f.rho_a_seg[i] = density(rng);
        f.q_a_seg[i] = f.rho_a_seg[i] * speed(rng);
      }
      f.q0_a = density(rng) * speed(rng);
      f.r_a = f.s_a = f.r_meas = f.s_meas = Vector::Zero(n);
      f.r_a[n / 2] = ramp(rng);
      seq.push_back(build_system_measured(f, g));
    }
    const Matrix obs = observability_matrix(seq);
    double product = 1.0;
    for (int row = 0; row < n; ++row) {
      double chain = 1.0;
      for (int t = 0; t < row; ++t) chain *= seq[row - 1 - t].a_mat(n - 1 - t, n - 2 - t);
      product *= chain;
    }
    const double det = observability_determinant(obs);
    if (det == 0.0) ++zero_dets;
    worst_rel = std::max(worst_rel, std::abs(std::abs(det) - std::abs(product)) / std::abs(product));
    for (int sensor = 1; sensor < n; ++sensor) {
      if (zero_columns(observability_matrix(seq, sensor)) != n - sensor) ++blind_failures;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst_rel <= 1e-9 && zero_dets == 0 && blind_failures == 0 && elapsed < 1.0;
  return {pass, fmt("trials=100 max_rel_det_err=%.3e zero_dets=%d sensor_failures=%d runtime=%.3fs", worst_rel,
                    zero_dets, blind_failures, elapsed)};
}

// 3. Exact start and no noise keep the filter on the truth; P stays symmetric
// and PSD in that run and in the noisy runs for both realizations.
Outcome filter_exactness() {
  Scenario exact = noise_free_default();
  exact.filter.init_from_truth = true;
  const RunResult res = run_experiment(exact);
  double worst = 0.0;
  for (int k = 0; k <= res.truth.steps(); ++k) {
    const auto& s = res.truth.states[k];
    worst = std::max(worst, (res.estimate.x_hat[k] - inverse_penetration(s.rho, s.rho_a)).cwiseAbs().maxCoeff());
  }
  double min_eig = std::numeric_limits<double>::infinity();
  double asym = 0.0;
  auto scan = [&](const EstimateRun& est) {
    for (double e : est.min_cov_eigenvalue) min_eig = std::min(min_eig, e);
    for (double a : est.cov_asymmetry) asym = std::max(asym, a);
  };
  scan(res.estimate);
  Scenario noisy;
  const TruthRun truth = generate_truth(noisy);
  scan(run_filter(noisy, truth, noisy.kalman_config()));
  noisy.offramp_mode = OffRampMode::kUnmeasured;
  scan(run_filter(noisy, truth, noisy.kalman_config()));
  const bool pass = worst <= 1e-9 && min_eig >= -1e-9 && asym == 0.0;
  return {pass, fmt("max_err=%.3e min_eig=%.3e max_asym=%.3e", worst, min_eig, asym)};
}

// 4. From μ = 10 the estimated share at segments 2 and 8 settles within 10%
// inside 15 minutes and mostly stays there.
Outcome convergence() {
  const Scenario sc;
  const RunResult res = run_experiment(sc);
  const int settle = static_cast<int>(std::llround(0.25 / sc.geometry.step_h));
  std::string detail;
  bool pass = true;
  for (int seg : {2, 8}) {
    const int i = seg - 1;
    auto within = [&](int k) {
      const auto& s = res.truth.states[k];
      const double truth = s.rho_a[i] / s.rho[i];
      const double est = 1.0 / res.estimate.x_hat[k][i];
      return std::abs(est - truth) <= 0.1 * truth;
    };
    int first = -1;
    for (int k = 0; k <= settle && first < 0; ++k) {
      if (within(k)) first = k;
    }
    int inside = 0;
    const int rest = res.truth.steps() - settle;
    for (int k = settle + 1; k <= res.truth.steps(); ++k) inside += within(k) ? 1 : 0;
    const double frac = static_cast<double>(inside) / rest;
    pass = pass && first >= 0 && frac >= 0.9;
    detail += fmt("seg%d: first_within=%d frac_after=%.4f ", seg, first, frac);
  }
  return {pass, detail + fmt("settle_steps=%d", settle)};
}

// 5. Congestion at segment 2 only in the middle hour, starting near segment 6
// and spreading upstream.
Outcome congestion() {
  const Scenario sc;
  const TruthRun run = generate_truth(sc);
  const double crit = sc.metanet.rho_crit;
  const int hour = static_cast<int>(std::llround(1.0 / sc.geometry.step_h));
  double peak_first = 0.0, peak_mid = 0.0, peak_last = 0.0;
  for (int k = 0; k <= run.steps(); ++k) {
    const double r2 = run.states[k].rho[1];
    double& slot = k < hour ? peak_first : (k <= 2 * hour ? peak_mid : peak_last);
    slot = std::max(slot, r2);
  }
  std::vector<int> onset(sc.geometry.n_segments, -1);
  int first_seg = -1, first_k = run.steps() + 1;
  for (int i = 0; i < sc.geometry.n_segments; ++i) {
    for (int k = 0; k <= run.steps(); ++k) {
      if (run.states[k].rho[i] > crit) {
        onset[i] = k;
        break;
      }
    }
    if (onset[i] >= 0 && onset[i] < first_k) {
      first_k = onset[i];
      first_seg = i + 1;
    }
  }
  bool upstream = first_seg >= 5 && first_seg <= 7;
  for (int seg = first_seg; upstream && seg > 2; --seg) {
    const int down = onset[seg - 1], up = onset[seg - 2];
    upstream = down >= 0 && up >= down;
  }
  const bool pass = peak_first < crit && peak_mid > crit && peak_last < crit && upstream;
  return {pass, fmt("rho2_peak first/mid/last=%.2f/%.2f/%.2f first_congested_seg=%d at %.3fh onset_seg2=%.3fh",
                    peak_first, peak_mid, peak_last, first_seg, first_k * sc.geometry.step_h,
                    onset[1] * sc.geometry.step_h)};
}

// 6. P_R is insensitive to the process-noise scale over four decades.
Outcome q_robustness() {
  const auto t0 = Clock::now();
  const Scenario sc;
  const auto pts = q_sweep(sc, {1e-2, 1e-1, 1.0, 10.0, 1e2});
  const double elapsed = seconds_since(t0);
  double lo = pts.front().p_r, hi = lo;
  std::string values;
  for (const auto& p : pts) {
    lo = std::min(lo, p.p_r);
    hi = std::max(hi, p.p_r);
    values += fmt("%g:%.2f%% ", p.sigma, 100.0 * p.p_r);
  }
  const bool pass = hi / lo < 2.0 && hi < 0.15 && elapsed < 30.0;
  return {pass, values + fmt("ratio=%.4f runtime=%.3fs", hi / lo, elapsed)};
}

// 7. Total vehicles change by exactly what crosses the boundaries and ramps.
Outcome conservation() {
  double worst = 0.0;
  int checked = 0;
  auto check = [&](const Scenario& sc) {
    const TruthRun run = generate_truth(sc);
    const Vector& len = sc.geometry.seg_len_km;
    const int n = sc.geometry.n_segments;
    for (int k = 0; k < run.steps(); ++k) {
      const auto& now = run.states[k];
      const auto& next = run.states[k + 1];
      const auto& in = run.inputs[k];
      const double total = len.dot(next.rho) - len.dot(now.rho) -
                           sc.geometry.step_h * (in.q0 - now.q[n - 1] + in.r.sum() - in.s.sum());
      const double connected = len.dot(next.rho_a) - len.dot(now.rho_a) -
                               sc.geometry.step_h * (in.q0_a - now.q_a[n - 1] + in.r_a.sum() - in.s_a.sum());
      worst = std::max({worst, std::abs(total), std::abs(connected)});
      ++checked;
    }
  };
  check(noise_free_default());
  Scenario shifted = noise_free_default();
  shifted.noise.seed = 99;
  shifted.entry.share = PiecewiseLinear({{0.0, 0.1}, {1.5, 0.4}, {3.0, 0.2}});
  check(shifted);
  return {worst <= 1e-9, fmt("steps_checked=%d max_residual=%.3e veh", checked, worst)};
}

// 8. The default run reproduces the frozen performance index.
Outcome determinism() {
  const RunResult a = run_experiment(Scenario{});
  const RunResult b = run_experiment(Scenario{});
  const double diff = std::abs(a.p_r - golden::kDefaultPr);
  const bool pass = diff <= 1e-12 && a.p_r == b.p_r;
  return {pass, fmt("p_r=%.17g golden=%.17g diff=%.3e", a.p_r, golden::kDefaultPr, diff)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"model equivalence (both off-ramp realizations)", model_equivalence},
      {"observability determinant and sensor placement", observability},
      {"filter exactness and covariance health", filter_exactness},
      {"convergence at segments 2 and 8", convergence},
      {"congestion reproduction", congestion},
      {"Q robustness sweep", q_robustness},
      {"conservation", conservation},
      {"determinism regression", determinism},
  };
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
  }
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (only != 0 && static_cast<int>(c) + 1 != only) continue;
    Outcome out;
    try {
      out = criteria[c].run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s criterion %zu: %s | %s\n", out.pass ? "PASS" : "FAIL", c + 1, criteria[c].name,
                out.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
