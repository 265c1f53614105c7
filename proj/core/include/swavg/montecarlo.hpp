#pragma once

#include <cstdint>
#include <vector>

#include "swavg/chain.hpp"
#include "swavg/system.hpp"

namespace swavg::montecarlo {

using chain::ChainError;
using chain::GeneratorMatrix;
using system::FieldPtr;

// Declined to run: the field could not be certified for conditions I/II.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  GeneratorMatrix generator;
  FieldPtr field;
  Eigen::VectorXd u0;
  int initial_state = 0;
  double horizon = 1.0;
  std::vector<double> epsilons;
  int paths = 2000;
  std::vector<double> deviation_thresholds;  // delta
  std::vector<double> containment_levels;    // c
  std::uint64_t seed = 0;
  double h_max = 1e-3;    // integrator step bound
  double h_dense = 1e-2;  // averaged-trajectory output grid
  bool allow_uncertified = false;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// Per-path functionals over the trajectory grid (which contains all jump
// times plus the dense output times).
struct PathStats {
  double sup_u = 0.0;      // max |u_t|
  double sup_u_sq = 0.0;   // its square
  double sup_dev = 0.0;    // max |u_t - u_hat_t|
  std::uint64_t path_index = 0;
  bool blew_up = false;
};

struct EpsilonRow {
  double epsilon = 0.0;
  int paths = 0;
  int excluded = 0;  // blow-ups; any exclusion voids certification of the row
  double mean_dev = 0.0;
  double se_dev = 0.0;
  double median_dev = 0.0;
  double q90_dev = 0.0;
  double q99_dev = 0.0;
  std::vector<double> p_dev_exceeds;     // per deviation threshold
  std::vector<double> se_dev_exceeds;
  double mean_sup_sq = 0.0;
  double se_sup_sq = 0.0;
  std::vector<double> p_sup_exceeds;     // per containment level
  std::vector<double> se_sup_exceeds;
  double wall_seconds = 0.0;
};

struct EstimateTable {
  std::vector<double> deviation_thresholds;
  std::vector<double> containment_levels;
  std::vector<EpsilonRow> rows;
  bool certified = false;
  double growth_constant = 0.0;  // L used for the moment-bound envelope
};

// Certification gate shared by the studies: conditions I and II on the
// sampling region (clipped to the field's invariant box when present).
bool certify_field(const ExperimentSpec& spec, std::string* reason = nullptr);

// All three studies share the same sampling engine; they differ only in
// which columns of the table are meaningful.
EstimateTable run_deviation_study(const ExperimentSpec& spec);
EstimateTable run_moment_bound_study(const ExperimentSpec& spec);
EstimateTable run_ccc_study(const ExperimentSpec& spec);

// Envelope constants from the quadratic moment bound: E sup^2 <= k1 exp(k2 T)
// with k1 = 2|u0|^2 + 4 L^2 T^2 and k2 = 4 L^2 T (see docs/moment_bound.md).
struct GronwallEnvelope {
  double k1 = 0.0;
  double k2 = 0.0;
  [[nodiscard]] double bound(double horizon) const;
};
GronwallEnvelope gronwall_envelope(double u0_norm, double growth_constant, double horizon);

// Weighted least-squares slope of y against log(epsilon), with its standard
// error; used for the no-growth-trend check.
struct TrendFit {
  double slope = 0.0;
  double se = 0.0;
};
TrendFit trend_vs_log_epsilon(const std::vector<double>& epsilons,
                              const std::vector<double>& values,
                              const std::vector<double>& std_errors);

}  // namespace swavg::montecarlo
