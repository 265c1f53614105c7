#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "swavg/chain.hpp"
#include "swavg/montecarlo.hpp"
#include "swavg/perturbation.hpp"
#include "swavg/scenario.hpp"
#include "swavg/system.hpp"

namespace {

namespace fs = std::filesystem;
using namespace swavg;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCertification = 3;
constexpr int kExitNumerical = 4;

struct Options {
  std::string scenario_path;
  std::string out_dir = "out";
  std::vector<double> epsilon_override;
  std::optional<int> paths_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> h_max_override;
  int threads = 0;
  bool allow_uncertified = false;
  bool dump_paths = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("-s,--scenario", opt.scenario_path, "scenario or manifest file")->required();
  cmd->add_option("-o,--out", opt.out_dir, "output directory");
  cmd->add_option("--epsilon", opt.epsilon_override, "override the epsilon list");
  cmd->add_option("--paths", opt.paths_override, "override paths per epsilon");
  cmd->add_option("--seed", opt.seed_override, "override the master seed");
  cmd->add_option("--h-max", opt.h_max_override, "override the integrator step bound");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
  cmd->add_flag("--allow-uncertified", opt.allow_uncertified,
                "run even if the field fails condition certification (output marked)");
  cmd->add_flag("--dump-paths", opt.dump_paths, "also write trajectories.csv");
}

scenario::Scenario load(const Options& opt) {
  scenario::Scenario s = scenario::load_scenario(opt.scenario_path);
  if (!opt.epsilon_override.empty()) s.epsilons = opt.epsilon_override;
  if (opt.paths_override) s.paths = *opt.paths_override;
  if (opt.seed_override) s.seed = *opt.seed_override;
  if (opt.h_max_override) s.h_max = *opt.h_max_override;
  return s;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw scenario::ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << content;
}

void write_manifest(const Options& opt, const scenario::Scenario& s, const std::string& subcommand,
                    double wall_seconds) {
  write_file(fs::path(opt.out_dir) / "manifest",
             scenario::manifest_json(s, subcommand, wall_seconds));
}

std::string study_trajectories_csv(const scenario::Scenario& s,
                                   const montecarlo::ExperimentSpec& spec) {
  // first path of each epsilon, enough to eyeball a run
  std::string out = "epsilon,t,regime,u_1\n";
  for (std::size_t ei = 0; ei < spec.epsilons.size(); ++ei) {
    auto stream = RngStream::substream(spec.seed, ei, 0);
    const auto jumps = chain::simulate_chain(spec.generator, spec.horizon, spec.epsilons[ei],
                                             spec.initial_state, stream);
    const auto path = system::integrate_switched(*spec.field, jumps, spec.u0, spec.h_max);
    for (std::size_t i = 0; i < path.times.size(); ++i)
      out += fmt::format("{},{},{},{}\n", scenario::format_number(spec.epsilons[ei]),
                         scenario::format_number(path.times[i]),
                         spec.generator.labels[static_cast<std::size_t>(path.regimes[i])],
                         scenario::format_number(path.values[i][0]));
  }
  (void)s;
  return out;
}

int run_study(const Options& opt, const std::string& kind) {
  const auto t0 = std::chrono::steady_clock::now();
  const scenario::Scenario s = load(opt);
  montecarlo::ExperimentSpec spec = s.build_experiment();
  spec.threads = opt.threads;
  spec.allow_uncertified = opt.allow_uncertified;

  montecarlo::EstimateTable table;
  if (kind == "deviation-study")
    table = montecarlo::run_deviation_study(spec);
  else if (kind == "moment-study")
    table = montecarlo::run_moment_bound_study(spec);
  else
    table = montecarlo::run_ccc_study(spec);

  std::string csv = scenario::table_csv(table);
  if (kind == "moment-study") {
    const auto env =
        montecarlo::gronwall_envelope(spec.u0.norm(), table.growth_constant, spec.horizon);
    for (const auto& row : table.rows)
      csv += fmt::format("{},gronwall_bound,{},\n", scenario::format_number(row.epsilon),
                         scenario::format_number(env.bound(spec.horizon)));
  }
  if (!table.certified) csv += ",certified,0,\n";
  write_file(fs::path(opt.out_dir) / "results.csv", csv);
  if (opt.dump_paths)
    write_file(fs::path(opt.out_dir) / "trajectories.csv", study_trajectories_csv(s, spec));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, s, kind, wall);
  return kExitOk;
}

int run_chain_analyze(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const scenario::Scenario s = load(opt);
  const auto generator = s.build_chain();
  const auto analysis = chain::analyze(generator);
  write_file(fs::path(opt.out_dir) / "results.csv",
             scenario::chain_analysis_csv(generator, analysis));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, s, "chain-analyze", wall);
  return kExitOk;
}

int run_residual_check(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const scenario::Scenario s = load(opt);
  const auto generator = s.build_chain();
  const auto analysis = chain::analyze(generator);
  const auto field = s.build_field();
  const auto phi = s.build_phi();

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(s.u_grid.points));
  for (int i = 0; i < s.u_grid.points; ++i)
    grid.push_back(s.u_grid.lo + (s.u_grid.hi - s.u_grid.lo) * i / (s.u_grid.points - 1));

  std::string csv;
  double max_residual = 0.0;
  for (double eps : s.epsilons) {
    const auto report = perturbation::residual_check(*phi, eps, generator, *field, analysis, grid);
    max_residual = std::max(max_residual, report.max_residual);
    if (csv.empty()) csv = scenario::residual_csv(report);
  }
  write_file(fs::path(opt.out_dir) / "results.csv", csv);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, s, "residual-check", wall);
  std::cerr << fmt::format("max residual over epsilon list: {}\n", max_residual);
  return kExitOk;
}

int run_simulate(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const scenario::Scenario s = load(opt);
  montecarlo::ExperimentSpec spec = s.build_experiment();
  const double epsilon = spec.epsilons.front();

  auto stream = RngStream::substream(spec.seed, 0, 0);
  const auto jumps =
      chain::simulate_chain(spec.generator, spec.horizon, epsilon, spec.initial_state, stream);
  const auto path = system::integrate_switched(*spec.field, jumps, spec.u0, spec.h_max);

  const auto analysis = chain::analyze(spec.generator);
  const auto averaged_field = system::averaged_drift(spec.field, analysis.pi);
  const auto averaged =
      system::integrate_averaged(*averaged_field, spec.u0, spec.horizon, spec.h_max);

  double sup_dev = 0.0;
  for (std::size_t i = 0; i < path.times.size(); ++i)
    sup_dev = std::max(sup_dev, (path.values[i] -
                                 system::eval_averaged(averaged, *averaged_field, path.times[i]))
                                    .norm());

  std::string csv = "epsilon,statistic,value,stderr\n";
  csv += fmt::format("{},jumps,{},\n", scenario::format_number(epsilon), jumps.jump_times.size());
  csv += fmt::format("{},u_final,{},\n", scenario::format_number(epsilon),
                     scenario::format_number(path.values.back()[0]));
  csv += fmt::format("{},u_hat_final,{},\n", scenario::format_number(epsilon),
                     scenario::format_number(averaged.values.back()[0]));
  csv += fmt::format("{},sup_dev,{},\n", scenario::format_number(epsilon),
                     scenario::format_number(sup_dev));
  write_file(fs::path(opt.out_dir) / "results.csv", csv);
  write_file(fs::path(opt.out_dir) / "trajectories.csv",
             scenario::trajectory_csv(path, spec.generator.labels));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(opt, s, "simulate", wall);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-switched evolutionary systems: simulation, averaging, and verification"};
  app.require_subcommand(1);

  Options opt;
  auto* chain_analyze = app.add_subcommand("chain-analyze", "stationary distribution and potential");
  auto* residual = app.add_subcommand("residual-check", "generator-expansion residuals over a u-grid");
  auto* simulate = app.add_subcommand("simulate", "one switched trajectory plus the averaged one");
  auto* deviation = app.add_subcommand("deviation-study", "sup-deviation statistics per epsilon");
  auto* moment = app.add_subcommand("moment-study", "second-moment bound statistics per epsilon");
  auto* ccc = app.add_subcommand("ccc-study", "compact-containment exceedance probabilities");
  for (auto* cmd : {chain_analyze, residual, simulate, deviation, moment, ccc})
    add_common(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (chain_analyze->parsed()) return run_chain_analyze(opt);
    if (residual->parsed()) return run_residual_check(opt);
    if (simulate->parsed()) return run_simulate(opt);
    if (deviation->parsed()) return run_study(opt, "deviation-study");
    if (moment->parsed()) return run_study(opt, "moment-study");
    return run_study(opt, "ccc-study");
  } catch (const scenario::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const chain::ChainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const montecarlo::CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertification;
  } catch (const chain::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
