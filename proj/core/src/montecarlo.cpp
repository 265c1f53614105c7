#include "swavg/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>

#include <fmt/core.h>

#include "swavg/rng.hpp"

namespace swavg::montecarlo {

namespace {

double quantile(std::vector<double> sorted, double level) {
  if (sorted.empty()) return 0.0;
  const auto n = sorted.size();
  const auto idx = std::min(n - 1, static_cast<std::size_t>(std::ceil(level * n)) -
                                       (level > 0.0 ? 1 : 0));
  return sorted[idx];
}

std::vector<double> dense_grid(double horizon, double h_dense) {
  const int n = std::max(1, static_cast<int>(std::ceil(horizon / h_dense - 1e-12)));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) grid.push_back(horizon * i / n);
  return grid;
}

PathStats simulate_one(const ExperimentSpec& spec, double epsilon, std::size_t eps_index,
                       std::uint64_t path_index, const std::vector<double>& grid,
                       const system::AveragedPath& averaged,
                       const system::VelocityField& averaged_field) {
  PathStats stats;
  stats.path_index = path_index;
  auto stream = RngStream::substream(spec.seed, eps_index, path_index);
  try {
    const chain::JumpPath jumps =
        chain::simulate_chain(spec.generator, spec.horizon, epsilon, spec.initial_state, stream);
    const system::SwitchedPath path =
        system::integrate_switched(*spec.field, jumps, spec.u0, spec.h_max, grid);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
      const double mag = path.values[i].norm();
      stats.sup_u = std::max(stats.sup_u, mag);
      const Eigen::VectorXd ref = system::eval_averaged(averaged, averaged_field, path.times[i]);
      stats.sup_dev = std::max(stats.sup_dev, (path.values[i] - ref).norm());
    }
    stats.sup_u_sq = stats.sup_u * stats.sup_u;
  } catch (const chain::NumericalError&) {
    stats.blew_up = true;
  }
  return stats;
}

EpsilonRow reduce(const ExperimentSpec& spec, double epsilon,
                  const std::vector<PathStats>& all) {
  EpsilonRow row;
  row.epsilon = epsilon;
  std::vector<double> devs;
  std::vector<double> sups;
  devs.reserve(all.size());
  sups.reserve(all.size());
  for (const auto& s : all) {
    if (s.blew_up) {
      ++row.excluded;
      continue;
    }
    devs.push_back(s.sup_dev);
    sups.push_back(s.sup_u);
  }
  row.paths = static_cast<int>(devs.size());
  if (row.paths == 0) return row;
  const double n = static_cast<double>(row.paths);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (double d : devs) {
    sum += d;
    sum_sq += d * d;
  }
  row.mean_dev = sum / n;
  const double var_dev = std::max(0.0, sum_sq / n - row.mean_dev * row.mean_dev);
  row.se_dev = std::sqrt(var_dev / n);

  std::vector<double> sorted = devs;
  std::sort(sorted.begin(), sorted.end());
  row.median_dev = quantile(sorted, 0.5);
  row.q90_dev = quantile(sorted, 0.9);
  row.q99_dev = quantile(sorted, 0.99);

  for (double delta : spec.deviation_thresholds) {
    double count = 0.0;
    for (double d : devs) count += d > delta ? 1.0 : 0.0;
    const double p = count / n;
    row.p_dev_exceeds.push_back(p);
    row.se_dev_exceeds.push_back(std::sqrt(p * (1.0 - p) / n));
  }

  double sum2 = 0.0;
  double sum4 = 0.0;
  for (double s : sups) {
    sum2 += s * s;
    sum4 += s * s * s * s;
  }
  row.mean_sup_sq = sum2 / n;
  const double var2 = std::max(0.0, sum4 / n - row.mean_sup_sq * row.mean_sup_sq);
  row.se_sup_sq = std::sqrt(var2 / n);

  for (double c : spec.containment_levels) {
    double count = 0.0;
    for (double s : sups) count += s > c ? 1.0 : 0.0;
    const double p = count / n;
    row.p_sup_exceeds.push_back(p);
    row.se_sup_exceeds.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return row;
}

EstimateTable run_study(const ExperimentSpec& spec) {
  spec.validate();
  std::string reason;
  const bool certified = certify_field(spec, &reason);
  if (!certified && !spec.allow_uncertified)
    throw CertificationError(fmt::format("field failed condition certification: {}", reason));

  EstimateTable table;
  table.deviation_thresholds = spec.deviation_thresholds;
  table.containment_levels = spec.containment_levels;
  table.certified = certified;
  if (auto l = spec.field->growth_constant()) table.growth_constant = *l;

  const chain::ChainAnalysis analysis = chain::analyze(spec.generator);
  const FieldPtr averaged_field = system::averaged_drift(spec.field, analysis.pi);
  const std::vector<double> grid = dense_grid(spec.horizon, spec.h_dense);
  const system::AveragedPath averaged =
      system::integrate_averaged(*averaged_field, spec.u0, spec.horizon, spec.h_max, grid);

  int workers = spec.threads > 0 ? spec.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, spec.paths));

  for (std::size_t ei = 0; ei < spec.epsilons.size(); ++ei) {
    const double epsilon = spec.epsilons[ei];
    const auto t0 = std::chrono::steady_clock::now();

    // each path writes its own slot; the serial reduction below makes the
    // result independent of the thread count
    std::vector<PathStats> stats(static_cast<std::size_t>(spec.paths));
    auto work = [&](int worker) {
      for (int p = worker; p < spec.paths; p += workers)
        stats[static_cast<std::size_t>(p)] =
            simulate_one(spec, epsilon, ei, static_cast<std::uint64_t>(p), grid, averaged,
                         *averaged_field);
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }

    EpsilonRow row = reduce(spec, epsilon, stats);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (row.excluded > 0) table.certified = false;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (!field) throw ChainError("experiment has no velocity field");
  if (!(horizon > 0.0)) throw ChainError(fmt::format("horizon must be positive, got {}", horizon));
  if (paths < 1) throw ChainError(fmt::format("path count must be >= 1, got {}", paths));
  if (epsilons.empty()) throw ChainError("epsilon list is empty");
  for (double e : epsilons)
    if (!(e > 0.0)) throw ChainError(fmt::format("epsilon must be positive, got {}", e));
  for (double d : deviation_thresholds)
    if (!(d > 0.0)) throw ChainError(fmt::format("deviation threshold must be positive, got {}", d));
  for (double c : containment_levels)
    if (!(c > 0.0)) throw ChainError(fmt::format("containment level must be positive, got {}", c));
  if (field->num_states() != generator.size())
    throw ChainError(fmt::format("field has {} regimes, chain has {}", field->num_states(),
                                 generator.size()));
  if (u0.size() != field->dim())
    throw ChainError(fmt::format("u0 has dimension {}, field expects {}", u0.size(), field->dim()));
  if (!(h_max > 0.0) || !(h_dense > 0.0)) throw ChainError("step bounds must be positive");
}

bool certify_field(const ExperimentSpec& spec, std::string* reason) {
  const auto& field = *spec.field;
  if (!field.growth_constant() || !field.lipschitz_constant()) {
    if (reason) *reason = "field declares no growth/Lipschitz constants";
    return false;
  }
  system::Box box;
  const int d = field.dim();
  box.lo = Eigen::VectorXd::Constant(d, -10.0).cwiseMin(spec.u0.array().minCoeff() - 1.0);
  box.hi = Eigen::VectorXd::Constant(d, 10.0).cwiseMax(spec.u0.array().maxCoeff() + 1.0);
  if (auto domain = field.invariant_box()) {
    if (!domain->contains(spec.u0)) {
      if (reason)
        *reason = fmt::format("initial condition outside the field's invariant domain [{} , {}]",
                              domain->lo[0], domain->hi[0]);
      return false;
    }
  }
  const system::ConditionReport report = system::check_conditions(field, box, 41);
  if (!report.growth_ok) {
    if (reason)
      *reason = fmt::format("linear-growth estimate {} exceeds declared constant",
                            report.growth_estimate);
    return false;
  }
  if (!report.lipschitz_ok) {
    if (reason)
      *reason = fmt::format("Lipschitz estimate {} exceeds declared constant",
                            report.lipschitz_estimate);
    return false;
  }
  return true;
}

EstimateTable run_deviation_study(const ExperimentSpec& spec) { return run_study(spec); }
EstimateTable run_moment_bound_study(const ExperimentSpec& spec) { return run_study(spec); }
EstimateTable run_ccc_study(const ExperimentSpec& spec) { return run_study(spec); }

double GronwallEnvelope::bound(double horizon) const { return k1 * std::exp(k2 * horizon); }

GronwallEnvelope gronwall_envelope(double u0_norm, double growth_constant, double horizon) {
  GronwallEnvelope env;
  env.k1 = 2.0 * u0_norm * u0_norm +
           4.0 * growth_constant * growth_constant * horizon * horizon;
  env.k2 = 4.0 * growth_constant * growth_constant * horizon;
  return env;
}

TrendFit trend_vs_log_epsilon(const std::vector<double>& epsilons,
                              const std::vector<double>& values,
                              const std::vector<double>& std_errors) {
  const std::size_t n = epsilons.size();
  if (n < 2 || values.size() != n || std_errors.size() != n)
    throw ChainError("trend fit needs matching lists with at least two entries");

  double sw = 0.0;
  double swx = 0.0;
  double swy = 0.0;
  double swxx = 0.0;
  double swxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / std::max(std_errors[i] * std_errors[i], 1e-300);
    const double x = std::log(epsilons[i]);
    sw += w;
    swx += w * x;
    swy += w * values[i];
    swxx += w * x * x;
    swxy += w * x * values[i];
  }
  const double det = sw * swxx - swx * swx;
  TrendFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.se = std::sqrt(sw / det);
  return fit;
}

}  // namespace swavg::montecarlo
