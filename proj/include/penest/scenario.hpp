#pragma once

#include <penest/demand.hpp>
#include <penest/highway.hpp>
#include <penest/kalman.hpp>
#include <penest/metanet.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace penest {

enum class OffRampMode { kMeasured, kUnmeasured };

inline const char* to_string(OffRampMode m) { return m == OffRampMode::kMeasured ? "measured" : "unmeasured"; }

inline std::optional<OffRampMode> parse_offramp_mode(const std::string& s) {
  if (s == "measured") return OffRampMode::kMeasured;
  if (s == "unmeasured") return OffRampMode::kUnmeasured;
  return std::nullopt;
}

/// Isotropic filter tuning: Q = q_sigma·I, R, μ, H = h·I.
struct FilterSettings {
  double q_sigma = 1.0;
  double r = 100.0;
  std::vector<double> mu = {10.0}; // one value broadcast, or one per segment
  double h = 1.0;
  bool init_from_truth = false;    // start at the true p̄(0) instead of μ
};

/// A complete experiment definition. Defaults reproduce the 20-segment
/// reference setup.
struct Scenario {
  HighwayGeometry geometry;
  MetanetParams metanet;
  RampLayout ramps{{2, 6, 10}, {4, 8, 12}, {0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}};
  DemandSource entry;
  std::map<int, DemandSource> on_ramp_demand; // keyed by 1-based segment
  NoiseSpec noise;
  FilterSettings filter;
  double horizon_h = 3.0;
  OffRampMode offramp_mode = OffRampMode::kMeasured;

  Scenario() {
    entry.total = PiecewiseLinear({{0.0, 1500.0}, {0.8, 1500.0}, {1.0, 1700.0}, {1.45, 1700.0}, {1.6, 1400.0}});
    on_ramp_demand[2].total = PiecewiseLinear::constant(200.0);
    on_ramp_demand[6].total =
        PiecewiseLinear({{0.0, 250.0}, {0.95, 250.0}, {1.05, 600.0}, {1.3, 600.0}, {1.4, 250.0}});
    on_ramp_demand[10].total = PiecewiseLinear::constant(150.0);
  }

  /// Number of steps M = horizon_h / T.
  int steps() const { return static_cast<int>(std::llround(horizon_h / geometry.step_h)); }

  double time_h(int k) const { return k * geometry.step_h; }

  /// Entry and on-ramp flows at step k; off-ramp flows are left at zero and
  /// are resolved against the traffic state by with_exit_flows.
  BoundaryInputs demand_at(int k) const {
    const int n = geometry.n_segments;
    const double t = time_h(k);
    BoundaryInputs in = BoundaryInputs::zeros(n);
    in.q0 = entry.flow(t);
    in.q0_a = entry.connected_flow(t);
    for (const auto& [seg, src] : on_ramp_demand) {
      in.r[seg - 1] = src.flow(t);
      in.r_a[seg - 1] = src.connected_flow(t);
    }
    return in;
  }

  Vector mu_vector() const {
    const int n = geometry.n_segments;
    if (filter.mu.size() == 1) return Vector::Constant(n, filter.mu.front());
    return Eigen::Map<const Vector>(filter.mu.data(), static_cast<Eigen::Index>(filter.mu.size()));
  }

  KalmanConfig kalman_config(double q_sigma) const {
    const int n = geometry.n_segments;
    return KalmanConfig(q_sigma * Matrix::Identity(n, n), filter.r, mu_vector(), filter.h * Matrix::Identity(n, n));
  }

  KalmanConfig kalman_config() const { return kalman_config(filter.q_sigma); }
};

struct ValidationIssue {
  std::string path;
  std::string message;
};

/// Scenario rejected; carries every problem found, each tagged with its JSON path.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<ValidationIssue> issues)
      : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& i : issues_) arr.push_back({{"path", i.path}, {"message", i.message}});
    return {{"error", "scenario_validation"}, {"issues", arr}};
  }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::ostringstream os;
    os << "invalid scenario (" << issues.size() << " issue" << (issues.size() == 1 ? "" : "s") << ")";
    for (const auto& i : issues) os << "; " << i.path << ": " << i.message;
    return os.str();
  }

  std::vector<ValidationIssue> issues_;
};

/// Cross-field checks on an assembled scenario. Returns every issue found.
inline std::vector<ValidationIssue> validate(const Scenario& sc) {
  std::vector<ValidationIssue> issues;
  auto guard = [&issues](const std::string& path, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      issues.push_back({path, e.what()});
    }
  };
  const int n = sc.geometry.n_segments;
  guard("/geometry", [&] { sc.geometry.validate(); });
  guard("/metanet", [&] { sc.metanet.validate(); });
  guard("/noise", [&] { sc.noise.validate(); });
  if (!issues.empty()) return issues;

  guard("/ramps", [&] { sc.ramps.validate(n); });
  for (const auto& [seg, src] : sc.on_ramp_demand) {
    const std::string path = "/demand/on_ramps/" + std::to_string(seg);
    if (!sc.ramps.has_on_ramp(seg)) {
      issues.push_back({path, "demand given for a segment without an on-ramp"});
    }
    if (src.total.min_value() < 0.0) issues.push_back({path + "/total", "flows must be >= 0"});
    if (src.share.min_value() < 0.0 || src.share.max_value() > 1.0) {
      issues.push_back({path + "/penetration", "penetration must lie in [0, 1]"});
    }
  }
  for (int seg : sc.ramps.on_ramp_segments) {
    if (!sc.on_ramp_demand.count(seg)) {
      issues.push_back({"/demand/on_ramps/" + std::to_string(seg), "on-ramp has no demand profile"});
    }
  }
  if (sc.entry.total.min_value() < 0.0) issues.push_back({"/demand/entry/total", "flows must be >= 0"});
  if (sc.entry.share.min_value() < 0.0 || sc.entry.share.max_value() > 1.0) {
    issues.push_back({"/demand/entry/penetration", "penetration must lie in [0, 1]"});
  }
  if (!(sc.horizon_h > 0.0)) {
    issues.push_back({"/horizon_h", "must be > 0"});
  } else {
    const double m = sc.horizon_h / sc.geometry.step_h;
    if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m)) {
      issues.push_back({"/horizon_h", "must be an integral number of time steps"});
    }
  }
  if (!(sc.filter.q_sigma > 0.0)) issues.push_back({"/filter/q_sigma", "must be > 0"});
  if (!(sc.filter.r > 0.0)) issues.push_back({"/filter/r", "must be > 0"});
  if (!(sc.filter.h > 0.0)) issues.push_back({"/filter/h", "must be > 0"});
  if (sc.filter.mu.size() != 1 && static_cast<int>(sc.filter.mu.size()) != n) {
    issues.push_back({"/filter/mu", "must be a scalar or have n_segments entries"});
  }
  return issues;
}

namespace detail {

using nlohmann::json;

class ScenarioReader {
 public:
  std::vector<ValidationIssue> issues;

  void read(const json& doc, Scenario& sc) {
    if (!doc.is_object()) {
      issues.push_back({"", "scenario must be a JSON object"});
      return;
    }
    allow(doc, "", {"geometry", "metanet", "ramps", "demand", "noise", "filter", "horizon_h", "offramp_mode", "seed"});
    if (const json* g = object(doc, "geometry", "/geometry")) read_geometry(*g, sc.geometry);
    if (const json* m = object(doc, "metanet", "/metanet")) read_metanet(*m, sc.metanet);
    if (const json* r = object(doc, "ramps", "/ramps")) read_ramps(*r, sc);
    if (const json* d = object(doc, "demand", "/demand")) read_demand(*d, sc);
    if (const json* z = object(doc, "noise", "/noise")) read_noise(*z, sc.noise);
    if (const json* f = object(doc, "filter", "/filter")) read_filter(*f, sc.filter);
    number(doc, "horizon_h", "/horizon_h", sc.horizon_h);
    if (doc.contains("seed")) {
      if (doc["seed"].is_number_unsigned()) {
        sc.noise.seed = doc["seed"].get<std::uint64_t>();
      } else {
        issues.push_back({"/seed", "must be a non-negative integer"});
      }
    }
    if (doc.contains("offramp_mode")) {
      const json& m = doc["offramp_mode"];
      auto mode = m.is_string() ? parse_offramp_mode(m.get<std::string>()) : std::nullopt;
      if (mode) {
        sc.offramp_mode = *mode;
      } else {
        issues.push_back({"/offramp_mode", "must be \"measured\" or \"unmeasured\""});
      }
    }
  }

 private:
  void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, _] : obj.items()) {
      if (!known.count(key)) issues.push_back({path + "/" + key, "unknown key"});
    }
  }

  const json* object(const json& parent, const char* key, const std::string& path) {
    if (!parent.contains(key)) return nullptr;
    if (!parent[key].is_object()) {
      issues.push_back({path, "must be an object"});
      return nullptr;
    }
    return &parent[key];
  }

  bool number(const json& parent, const char* key, const std::string& path, double& out) {
    if (!parent.contains(key)) return false;
    if (!parent[key].is_number()) {
      issues.push_back({path, "must be a number"});
      return false;
    }
    out = parent[key].get<double>();
    return true;
  }

  void read_geometry(const json& g, HighwayGeometry& geom) {
    allow(g, "/geometry", {"n_segments", "step_s", "seg_len_km"});
    if (g.contains("n_segments")) {
      if (g["n_segments"].is_number_integer()) {
        geom.n_segments = g["n_segments"].get<int>();
      } else {
        issues.push_back({"/geometry/n_segments", "must be an integer"});
      }
    }
    double step_s = geom.step_h * 3600.0;
    if (number(g, "step_s", "/geometry/step_s", step_s)) geom.step_h = step_s / 3600.0;
    const int n = std::max(geom.n_segments, 0);
    if (g.contains("seg_len_km")) {
      const json& len = g["seg_len_km"];
      if (len.is_number()) {
        geom.seg_len_km = Vector::Constant(n, len.get<double>());
      } else if (auto v = number_array(len, "/geometry/seg_len_km")) {
        geom.seg_len_km = Eigen::Map<const Vector>(v->data(), static_cast<Eigen::Index>(v->size()));
      }
    } else if (geom.seg_len_km.size() != n) {
      geom.seg_len_km = Vector::Constant(n, geom.seg_len_km.size() > 0 ? geom.seg_len_km[0] : 0.5);
    }
  }

  void read_metanet(const json& m, MetanetParams& p) {
    allow(m, "/metanet", {"tau_s", "nu", "kappa", "delta", "v_free", "rho_crit", "alpha"});
    double tau_s = p.tau_h * 3600.0;
    if (number(m, "tau_s", "/metanet/tau_s", tau_s)) p.tau_h = tau_s / 3600.0;
    number(m, "nu", "/metanet/nu", p.nu);
    number(m, "kappa", "/metanet/kappa", p.kappa);
    number(m, "delta", "/metanet/delta", p.delta_ramp);
    number(m, "v_free", "/metanet/v_free", p.v_free);
    number(m, "rho_crit", "/metanet/rho_crit", p.rho_crit);
    number(m, "alpha", "/metanet/alpha", p.alpha_exp);
  }

  std::optional<std::vector<double>> number_array(const json& j, const std::string& path) {
    if (!j.is_array()) {
      issues.push_back({path, "must be an array of numbers"});
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        issues.push_back({path + "/" + std::to_string(i), "must be a number"});
        return std::nullopt;
      }
      out.push_back(j[i].get<double>());
    }
    return out;
  }

  std::optional<std::vector<int>> int_array(const json& j, const std::string& path) {
    if (!j.is_array()) {
      issues.push_back({path, "must be an array of integers"});
      return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number_integer()) {
        issues.push_back({path + "/" + std::to_string(i), "must be an integer"});
        return std::nullopt;
      }
      out.push_back(j[i].get<int>());
    }
    return out;
  }

  void read_ramps(const json& r, Scenario& sc) {
    allow(r, "/ramps", {"on_ramps", "off_ramps", "exit_rate", "exit_rate_a"});
    if (r.contains("on_ramps")) {
      if (auto v = int_array(r["on_ramps"], "/ramps/on_ramps")) {
        sc.ramps.on_ramp_segments = *v;
        sc.on_ramp_demand.clear();
      }
    }
    if (r.contains("off_ramps")) {
      if (auto v = int_array(r["off_ramps"], "/ramps/off_ramps")) sc.ramps.off_ramp_segments = *v;
    }
    const std::size_t n_off = sc.ramps.off_ramp_segments.size();
    auto rates = [&](const char* key, std::vector<double>& out) {
      const std::string path = std::string("/ramps/") + key;
      if (!r.contains(key)) {
        if (out.size() != n_off) out.assign(n_off, out.empty() ? 0.1 : out.front());
        return;
      }
      if (r[key].is_number()) {
        out.assign(n_off, r[key].get<double>());
      } else if (auto v = number_array(r[key], path)) {
        out = *v;
      }
    };
    rates("exit_rate", sc.ramps.exit_rate);
    if (!r.contains("exit_rate_a") && r.contains("exit_rate")) {
      sc.ramps.exit_rate_a = sc.ramps.exit_rate;
    } else {
      rates("exit_rate_a", sc.ramps.exit_rate_a);
    }
  }

  std::optional<PiecewiseLinear> profile(const json& j, const std::string& path) {
    if (j.is_number()) return PiecewiseLinear::constant(j.get<double>());
    if (!j.is_array() || j.empty()) {
      issues.push_back({path, "must be a number or a non-empty array of [t_h, value] pairs"});
      return std::nullopt;
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const json& p = j[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        issues.push_back({path + "/" + std::to_string(i), "breakpoint must be [t_h, value]"});
        return std::nullopt;
      }
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    try {
      return PiecewiseLinear(std::move(pts));
    } catch (const std::exception& e) {
      issues.push_back({path, e.what()});
      return std::nullopt;
    }
  }

  void read_source(const json& j, const std::string& path, DemandSource& src, const PiecewiseLinear& default_share) {
    if (!j.is_object()) {
      issues.push_back({path, "must be an object with \"total\" and optional \"penetration\""});
      return;
    }
    allow(j, path, {"total", "penetration"});
    src.share = default_share;
    if (j.contains("total")) {
      if (auto p = profile(j["total"], path + "/total")) src.total = *p;
    } else {
      issues.push_back({path + "/total", "missing"});
    }
    if (j.contains("penetration")) {
      if (auto p = profile(j["penetration"], path + "/penetration")) src.share = *p;
    }
  }

  void read_demand(const json& d, Scenario& sc) {
    allow(d, "/demand", {"penetration", "entry", "on_ramps"});
    PiecewiseLinear share = sc.entry.share;
    if (d.contains("penetration")) {
      if (auto p = profile(d["penetration"], "/demand/penetration")) share = *p;
    }
    sc.entry.share = share;
    for (auto& [_, src] : sc.on_ramp_demand) src.share = share;
    if (d.contains("entry")) read_source(d["entry"], "/demand/entry", sc.entry, share);
    if (const json* ramps = object(d, "on_ramps", "/demand/on_ramps")) {
      sc.on_ramp_demand.clear();
      for (const auto& [key, value] : ramps->items()) {
        const std::string path = "/demand/on_ramps/" + key;
        int seg = 0;
        try {
          std::size_t used = 0;
          seg = std::stoi(key, &used);
          if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
          issues.push_back({path, "key must be a segment number"});
          continue;
        }
        read_source(value, path, sc.on_ramp_demand[seg], share);
      }
    }
  }

  void read_noise(const json& z, NoiseSpec& noise) {
    allow(z, "/noise", {"std_entry_flow", "std_onramp", "std_offramp", "std_speed", "std_flow_proc",
                        "std_flow_proc_a", "seed", "enabled"});
    number(z, "std_entry_flow", "/noise/std_entry_flow", noise.std_entry_flow);
    number(z, "std_onramp", "/noise/std_onramp", noise.std_onramp);
    number(z, "std_offramp", "/noise/std_offramp", noise.std_offramp);
    number(z, "std_speed", "/noise/std_speed", noise.std_speed);
    number(z, "std_flow_proc", "/noise/std_flow_proc", noise.std_flow_proc);
    number(z, "std_flow_proc_a", "/noise/std_flow_proc_a", noise.std_flow_proc_a);
    if (z.contains("seed")) {
      if (z["seed"].is_number_unsigned()) {
        noise.seed = z["seed"].get<std::uint64_t>();
      } else {
        issues.push_back({"/noise/seed", "must be a non-negative integer"});
      }
    }
    if (z.contains("enabled")) {
      if (!z["enabled"].is_boolean()) {
        issues.push_back({"/noise/enabled", "must be a boolean"});
      } else if (!z["enabled"].get<bool>()) {
        noise = NoiseSpec::none(noise.seed);
      }
    }
  }

  void read_filter(const json& f, FilterSettings& fs) {
    allow(f, "/filter", {"q_sigma", "r", "mu", "h", "init"});
    number(f, "q_sigma", "/filter/q_sigma", fs.q_sigma);
    number(f, "r", "/filter/r", fs.r);
    number(f, "h", "/filter/h", fs.h);
    if (f.contains("mu")) {
      if (f["mu"].is_number()) {
        fs.mu = {f["mu"].get<double>()};
      } else if (auto v = number_array(f["mu"], "/filter/mu")) {
        fs.mu = *v;
      }
    }
    if (f.contains("init")) {
      const json& init = f["init"];
      if (init == "mu") {
        fs.init_from_truth = false;
      } else if (init == "truth") {
        fs.init_from_truth = true;
      } else {
        issues.push_back({"/filter/init", "must be \"mu\" or \"truth\""});
      }
    }
  }
};

}  // namespace detail

/// Builds a scenario from a JSON document. Omitted keys keep their defaults.
/// Throws ScenarioError listing every issue found.
inline Scenario scenario_from_json(const nlohmann::json& doc) {
  Scenario sc;
  detail::ScenarioReader reader;
  reader.read(doc, sc);
  if (!reader.issues.empty()) throw ScenarioError(reader.issues);
  auto issues = validate(sc);
  if (!issues.empty()) throw ScenarioError(issues);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({{"", "cannot open scenario file '" + path + "'"}});
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError({{"", std::string("malformed JSON: ") + e.what()}});
  }
  return scenario_from_json(doc);
}

namespace detail {

inline nlohmann::json profile_to_json(const PiecewiseLinear& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [t, y] : p.points()) arr.push_back({t, y});
  return arr;
}

inline nlohmann::json source_to_json(const DemandSource& s) {
  return {{"total", profile_to_json(s.total)}, {"penetration", profile_to_json(s.share)}};
}

}  // namespace detail

/// Full serialization; scenario_from_json(scenario_to_json(sc)) reproduces sc.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  using nlohmann::json;
  json on_ramps = json::object();
  for (const auto& [seg, src] : sc.on_ramp_demand) on_ramps[std::to_string(seg)] = detail::source_to_json(src);
  json mu = sc.filter.mu.size() == 1 ? json(sc.filter.mu.front()) : json(sc.filter.mu);
  return {
      {"geometry",
       {{"n_segments", sc.geometry.n_segments},
        {"step_s", sc.geometry.step_h * 3600.0},
        {"seg_len_km", std::vector<double>(sc.geometry.seg_len_km.begin(), sc.geometry.seg_len_km.end())}}},
      {"metanet",
       {{"tau_s", sc.metanet.tau_h * 3600.0},
        {"nu", sc.metanet.nu},
        {"kappa", sc.metanet.kappa},
        {"delta", sc.metanet.delta_ramp},
        {"v_free", sc.metanet.v_free},
        {"rho_crit", sc.metanet.rho_crit},
        {"alpha", sc.metanet.alpha_exp}}},
      {"ramps",
       {{"on_ramps", sc.ramps.on_ramp_segments},
        {"off_ramps", sc.ramps.off_ramp_segments},
        {"exit_rate", sc.ramps.exit_rate},
        {"exit_rate_a", sc.ramps.exit_rate_a}}},
      {"demand", {{"entry", detail::source_to_json(sc.entry)}, {"on_ramps", on_ramps}}},
      {"noise",
       {{"std_entry_flow", sc.noise.std_entry_flow},
        {"std_onramp", sc.noise.std_onramp},
        {"std_offramp", sc.noise.std_offramp},
        {"std_speed", sc.noise.std_speed},
        {"std_flow_proc", sc.noise.std_flow_proc},
        {"std_flow_proc_a", sc.noise.std_flow_proc_a},
        {"seed", sc.noise.seed}}},
      {"filter",
       {{"q_sigma", sc.filter.q_sigma},
        {"r", sc.filter.r},
        {"mu", mu},
        {"h", sc.filter.h},
        {"init", sc.filter.init_from_truth ? "truth" : "mu"}}},
      {"horizon_h", sc.horizon_h},
      {"offramp_mode", to_string(sc.offramp_mode)},
  };
}

}  // namespace penest
