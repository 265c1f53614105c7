#pragma once

// Test-only oracles. These deliberately avoid the production code paths they
// are used to check: the potential matrix is integrated by quadrature instead
// of solved, and the deviation statistics come from a separate first-order
// stepper with its own chain sampler.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "swavg/chain.hpp"
#include "swavg/system.hpp"

namespace swavg::testing {

inline chain::GeneratorMatrix random_irreducible_generator(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(0.5, 2.0);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  Eigen::VectorXd q(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) {
    q[0] = 0.0;
    return chain::build_generator(q, p);
  }
  for (int x = 0; x < n; ++x) {
    q[x] = rate(rng);
    double sum = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      p(x, y) = weight(rng);  // all off-diagonal positive, hence irreducible
      sum += p(x, y);
    }
    // exact unit row sum: make the largest entry absorb the rounding
    int arg = x == 0 ? 1 : 0;
    for (int y = 0; y < n; ++y)
      if (y != x && p(x, y) > p(x, arg)) arg = y;
    double rest = 0.0;
    for (int y = 0; y < n; ++y)
      if (y != x && y != arg) {
        p(x, y) /= sum;
        rest += p(x, y);
      }
    p(x, arg) = 1.0 - rest;
  }
  return chain::build_generator(q, p);
}

// Truncated integral of (P_t - Pi) by composite Simpson quadrature. The
// horizon comes from the spectral gap: ||P_t - Pi|| decays like exp(-gap t),
// so the dropped tail is below `tail_tol`.
inline Eigen::MatrixXd potential_by_quadrature(const chain::GeneratorMatrix& g,
                                               const Eigen::VectorXd& pi,
                                               double tail_tol = 1e-9) {
  const int n = g.size();
  const Eigen::MatrixXd projector = Eigen::VectorXd::Ones(n) * pi.transpose();
  if (n == 1) return Eigen::MatrixXd::Zero(1, 1);

  Eigen::EigenSolver<Eigen::MatrixXd> eigs(g.rate_matrix);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double re = eigs.eigenvalues()[i].real();
    if (re < -1e-12) gap = std::min(gap, -re);
  }
  // tail bound: integral of n exp(-gap t) beyond the horizon
  const double horizon = std::log(static_cast<double>(n) / (tail_tol * gap)) / gap;

  const int panels = 4000;  // Simpson error ~ (T/panels)^4, ample at this size
  const double h = horizon / (2 * panels);
  auto integrand = [&](double t) -> Eigen::MatrixXd {
    return chain::transition_semigroup(g, t) - projector;
  };
  Eigen::MatrixXd acc = integrand(0.0) + integrand(horizon);
  for (int k = 1; k < 2 * panels; ++k)
    acc += (k % 2 == 1 ? 4.0 : 2.0) * integrand(k * h);
  return acc * (h / 3.0);
}

// Independent regime sampler + forward-Euler integrator for deviation
// statistics. Separate RNG scheme (std::mt19937_64) and first-order stepping.
struct EulerOracleResult {
  double mean_dev = 0.0;
  double se_dev = 0.0;
};

inline EulerOracleResult euler_deviation_oracle(const chain::GeneratorMatrix& g,
                                                const system::VelocityField& field,
                                                const Eigen::VectorXd& pi, double u0,
                                                double horizon, double epsilon, int paths,
                                                std::uint64_t seed) {
  const double h_avg = 1e-4;
  std::vector<double> devs;
  devs.reserve(static_cast<std::size_t>(paths));

  // averaged reference on a fixed fine grid, also by Euler
  const int avg_steps = static_cast<int>(std::lround(horizon / h_avg));
  std::vector<double> u_hat(static_cast<std::size_t>(avg_steps) + 1);
  u_hat[0] = u0;
  for (int i = 0; i < avg_steps; ++i) {
    double drift = 0.0;
    for (int x = 0; x < g.size(); ++x) drift += pi[x] * field.value(u_hat[static_cast<std::size_t>(i)], x);
    u_hat[static_cast<std::size_t>(i) + 1] = u_hat[static_cast<std::size_t>(i)] + h_avg * drift;
  }
  auto u_hat_at = [&](double t) {
    const double s = std::clamp(t / h_avg, 0.0, static_cast<double>(avg_steps));
    const auto lo = static_cast<std::size_t>(s);
    if (lo >= static_cast<std::size_t>(avg_steps)) return u_hat.back();
    const double frac = s - static_cast<double>(lo);
    return (1.0 - frac) * u_hat[lo] + frac * u_hat[lo + 1];
  };

  const double h = epsilon / 10.0;
  for (int p = 0; p < paths; ++p) {
    std::mt19937_64 rng(seed + 0x100000ULL * static_cast<std::uint64_t>(p) + 7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int state = 0;
    double t = 0.0;
    double u = u0;
    double dev = std::abs(u - u_hat_at(0.0));
    std::exponential_distribution<double> expo(g.exit_rates[state] / epsilon);
    double next_jump = g.size() > 1 ? expo(rng) : horizon + 1.0;
    while (t < horizon) {
      const double step = std::min({h, horizon - t, next_jump - t});
      u += step * field.value(u, state);
      t += step;
      dev = std::max(dev, std::abs(u - u_hat_at(t)));
      if (t >= next_jump - 1e-15 && t < horizon) {
        const double draw = unif(rng);
        double acc = 0.0;
        for (int y = 0; y < g.size(); ++y) {
          acc += g.jump_kernel(state, y);
          if (draw <= acc) {
            state = y;
            break;
          }
        }
        std::exponential_distribution<double> next(g.exit_rates[state] / epsilon);
        next_jump = t + next(rng);
      }
    }
    devs.push_back(dev);
  }

  EulerOracleResult out;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double d : devs) {
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(devs.size());
  out.mean_dev = sum / n;
  out.se_dev = std::sqrt(std::max(0.0, sum_sq / n - out.mean_dev * out.mean_dev) / n);
  return out;
}

}  // namespace swavg::testing
