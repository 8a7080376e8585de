#include <penest/penest.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string offramp_mode;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("-s,--scenario", opt.scenario_path, "Scenario JSON file (built-in default when omitted)");
  cmd->add_option("--seed", opt.seed, "Override the scenario noise seed");
  cmd->add_option("-o,--out", opt.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--offramp-mode", opt.offramp_mode, "measured | unmeasured")
      ->check(CLI::IsMember({"measured", "unmeasured"}));
}

penest::Scenario resolve(const CommonOptions& opt) {
  penest::Scenario sc = opt.scenario_path.empty() ? penest::Scenario{} : penest::load_scenario(opt.scenario_path);
  if (opt.seed) sc.noise.seed = *opt.seed;
  if (!opt.offramp_mode.empty()) sc.offramp_mode = *penest::parse_offramp_mode(opt.offramp_mode);
  if (!sc.geometry.satisfies_cfl(sc.metanet.v_free)) {
    std::cerr << "warning: step_h * v_free exceeds the shortest segment length\n";
  }
  return sc;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void emit_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connected-vehicle share estimation on a simulated highway"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::vector<double> sigmas{0.01, 0.1, 1.0, 10.0, 100.0};
  int stride = 1;
  bool dump_scenario = false;

  auto* simulate = app.add_subcommand("simulate", "Generate the ground-truth trajectory only");
  add_common(simulate, opt);
  simulate->add_flag("--dump-scenario", dump_scenario, "Also write the resolved scenario as JSON");

  auto* estimate = app.add_subcommand("estimate", "Simulate, observe, and run the filter");
  add_common(estimate, opt);

  auto* sweep = app.add_subcommand("sweep", "Performance index as a function of Q = sigma*I");
  add_common(sweep, opt);
  sweep->add_option("--sigmas", sigmas, "Comma-separated sigma values")->delimiter(',')->capture_default_str();

  auto* observability = app.add_subcommand("observability", "Anti-diagonal magnitudes of the observability matrix");
  add_common(observability, opt);
  observability->add_option("--stride", stride, "Steps between window starts")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const penest::Scenario sc = resolve(opt);
    if (simulate->parsed()) {
      const auto truth = penest::generate_truth(sc);
      auto os = open_out(opt.out_dir, "truth.csv");
      penest::csv::write_truth(os, truth);
      if (dump_scenario) open_out(opt.out_dir, "scenario.json") << penest::scenario_to_json(sc).dump(2) << '\n';
      std::cout << "wrote " << truth.steps() + 1 << " steps to " << (fs::path(opt.out_dir) / "truth.csv").string()
                << '\n';
    } else if (estimate->parsed()) {
      const auto res = penest::run_experiment(sc);
      auto traj = open_out(opt.out_dir, "trajectory.csv");
      penest::csv::write_trajectory(traj, penest::csv::trajectory_rows(res));
      auto metrics = open_out(opt.out_dir, "metrics.csv");
      penest::csv::write_metrics(metrics, res);
      std::cout << "P_R = " << penest::csv::format(100.0 * res.p_r) << " %  (g clamps " << res.estimate.g_clamps
                << ", held outputs " << res.estimate.z_holds << ")\n";
    } else if (sweep->parsed()) {
      const auto points = penest::q_sweep(sc, sigmas);
      auto os = open_out(opt.out_dir, "sweep.csv");
      penest::csv::write_sweep(os, points);
      for (const auto& p : points) {
        std::cout << "sigma " << penest::csv::format(p.sigma) << "  P_R " << penest::csv::format(100.0 * p.p_r)
                  << " %\n";
      }
    } else if (observability->parsed()) {
      const auto truth = penest::generate_truth(sc);
      const auto windows = penest::observability_over_run(sc, truth, stride);
      auto os = open_out(opt.out_dir, "observability.csv");
      penest::csv::write_observability(os, windows);
      std::size_t observable = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& w : windows) {
        observable += w.observable ? 1 : 0;
        worst = std::min(worst, w.min_abs_anti_diagonal);
      }
      std::cout << observable << " / " << windows.size() << " windows observable; smallest anti-diagonal entry "
                << penest::csv::format(worst) << '\n';
    }
  } catch (const penest::ScenarioError& e) {
    std::cerr << e.to_json().dump() << '\n';
    return 2;
  } catch (const penest::NumericalFault& e) {
    emit_error("numerical_fault", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}
