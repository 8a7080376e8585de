#pragma once

#include <penest/experiment.hpp>

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace penest::csv {

/// Shortest decimal text that parses back to the same double.
inline std::string format(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: not a number: '" + std::string(s) + "'");
  }
  return x;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline constexpr std::string_view kTrajectoryHeader =
    "step,segment,rho,rho_a,v,q,q_a,rho_hat,q_hat,p_bar_hat,innovation";
inline constexpr std::string_view kTruthHeader = "step,segment,rho,rho_a,v,q,q_a";

struct TrajectoryRow {
  int step = 0;
  int segment = 0; // 1-based
  double rho = 0, rho_a = 0, v = 0, q = 0, q_a = 0;
  double rho_hat = 0, q_hat = 0, p_bar_hat = 0, innovation = 0;

  bool operator==(const TrajectoryRow&) const = default;
};

/// One row per (step, segment) joining truth and estimate.
inline std::vector<TrajectoryRow> trajectory_rows(const RunResult& res) {
  std::vector<TrajectoryRow> rows;
  const auto& truth = res.truth;
  const auto& est = res.estimate;
  for (int k = 0; k <= truth.steps(); ++k) {
    const TrafficState& s = truth.states[k];
    const Totals tot = reconstruct_totals(est.x_hat[k], truth.frames[k]);
    for (int i = 0; i < s.size(); ++i) {
      rows.push_back({k, i + 1, s.rho[i], s.rho_a[i], s.v[i], s.q[i], s.q_a[i], tot.rho_hat[i], tot.q_hat[i],
                      est.x_hat[k][i], est.innovation[k]});
    }
  }
  return rows;
}

inline void write_trajectory(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.segment << ',' << format(r.rho) << ',' << format(r.rho_a) << ',' << format(r.v) << ','
       << format(r.q) << ',' << format(r.q_a) << ',' << format(r.rho_hat) << ',' << format(r.q_hat) << ','
       << format(r.p_bar_hat) << ',' << format(r.innovation) << '\n';
  }
}

inline std::vector<TrajectoryRow> read_trajectory(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryHeader) {
    throw std::invalid_argument("csv: missing or unexpected trajectory header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 11) throw std::invalid_argument("csv: trajectory row must have 11 fields");
    TrajectoryRow r;
    r.step = static_cast<int>(parse(f[0]));
    r.segment = static_cast<int>(parse(f[1]));
    r.rho = parse(f[2]);
    r.rho_a = parse(f[3]);
    r.v = parse(f[4]);
    r.q = parse(f[5]);
    r.q_a = parse(f[6]);
    r.rho_hat = parse(f[7]);
    r.q_hat = parse(f[8]);
    r.p_bar_hat = parse(f[9]);
    r.innovation = parse(f[10]);
    rows.push_back(r);
  }
  return rows;
}

inline void write_truth(std::ostream& os, const TruthRun& truth) {
  os << kTruthHeader << '\n';
  for (int k = 0; k <= truth.steps(); ++k) {
    const TrafficState& s = truth.states[k];
    for (int i = 0; i < s.size(); ++i) {
      os << k << ',' << i + 1 << ',' << format(s.rho[i]) << ',' << format(s.rho_a[i]) << ',' << format(s.v[i]) << ','
         << format(s.q[i]) << ',' << format(s.q_a[i]) << '\n';
    }
  }
}

inline void write_metrics(std::ostream& os, const RunResult& res) {
  os << "p_r,g_clamps,z_holds,steps,segments,runtime_s\n";
  os << format(res.p_r) << ',' << res.estimate.g_clamps << ',' << res.estimate.z_holds << ',' << res.truth.steps()
     << ',' << res.truth.states.front().size() << ',' << format(res.runtime_s) << '\n';
}

inline void write_sweep(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "sigma,p_r\n";
  for (const auto& p : points) os << format(p.sigma) << ',' << format(p.p_r) << '\n';
}

inline std::vector<SweepPoint> read_sweep(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "sigma,p_r") {
    throw std::invalid_argument("csv: missing or unexpected sweep header");
  }
  std::vector<SweepPoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 2) throw std::invalid_argument("csv: sweep row must have 2 fields");
    out.push_back({parse(f[0]), parse(f[1])});
  }
  return out;
}

inline void write_observability(std::ostream& os, const std::vector<ObservabilityWindow>& windows) {
  os << "k0,observable,min_abs_anti_diagonal,log10_abs_det\n";
  for (const auto& w : windows) {
    os << w.k0 << ',' << (w.observable ? 1 : 0) << ',' << format(w.min_abs_anti_diagonal) << ','
       << format(w.log10_abs_det) << '\n';
  }
}

}  // namespace penest::csv
