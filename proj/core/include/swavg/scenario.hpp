#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "swavg/montecarlo.hpp"
#include "swavg/perturbation.hpp"

namespace swavg::scenario {

/// Scenario file or flag problem; message carries the field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldSpec {
  std::string id;  // constant | linear | bounded-trig | logistic
  std::vector<double> a;  // linear / trig gain, logistic growth rate
  std::vector<double> c;  // constant / affine offset
  std::vector<double> k;  // logistic capacity
};

struct PhiSpec {
  std::string type = "polynomial";  // polynomial | bump
  std::vector<double> coeffs{0.0, 1.0};
  double center = 0.0;
  double radius = 1.0;
};

struct GridSpec {
  double lo = -10.0;
  double hi = 10.0;
  int points = 201;
};

// One self-contained experiment description; everything a run needs and
// everything the manifest echoes back.
struct Scenario {
  std::vector<std::string> labels;
  std::vector<double> rates;
  std::vector<std::vector<double>> kernel;
  FieldSpec field;
  double u0 = 1.0;
  int initial_state = 0;
  double horizon = 1.0;
  std::vector<double> epsilons{0.1, 0.01, 0.001};
  int paths = 2000;
  std::uint64_t seed = 1u;
  double h_max = 1e-3;
  double h_dense = 1e-2;
  std::vector<double> deltas{0.05, 0.1, 0.2};
  std::vector<double> levels;  // default {2,5,10}*(|u0|+1), filled on load
  PhiSpec phi;
  GridSpec u_grid;

  [[nodiscard]] chain::GeneratorMatrix build_chain() const;
  [[nodiscard]] system::FieldPtr build_field() const;
  [[nodiscard]] perturbation::TestFunctionPtr build_phi() const;
  [[nodiscard]] montecarlo::ExperimentSpec build_experiment() const;
};

// Strict parse: unknown keys are rejected, defaults are materialized so the
// emitted manifest never contains silent values.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

// Fully materialized scenario plus run metadata; loadable as a scenario.
std::string manifest_json(const Scenario& s, const std::string& subcommand,
                          double wall_seconds);
std::string scenario_json(const Scenario& s);

// shortest representation that parses back to the same double
std::string format_number(double v);

std::string table_csv(const montecarlo::EstimateTable& table);
std::string residual_csv(const perturbation::PerturbationReport& report);
std::string trajectory_csv(const system::SwitchedPath& path,
                           const std::vector<std::string>& labels);
std::string chain_analysis_csv(const chain::GeneratorMatrix& g, const chain::ChainAnalysis& a);

}  // namespace swavg::scenario
