#include "swavg/chain.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <fmt/core.h>

namespace swavg::chain {

namespace {

// Strong connectivity of the support graph: forward and backward reachability
// from state 0.
bool irreducible(const Eigen::MatrixXd& kernel) {
  const int n = static_cast<int>(kernel.rows());
  if (n == 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y = 0; y < n; ++y) {
        const double w = forward ? kernel(x, y) : kernel(y, x);
        if (w > 0.0 && !seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(true) && reach(false);
}

}  // namespace

int JumpPath::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

GeneratorMatrix build_generator(std::vector<std::string> labels,
                                const Eigen::VectorXd& exit_rates,
                                const Eigen::MatrixXd& jump_kernel) {
  const int n = static_cast<int>(exit_rates.size());
  if (n < 1) throw ChainError("chain must have at least one state");
  if (n > kMaxStates)
    throw ChainError(fmt::format("chain has {} states, limit is {}", n, kMaxStates));
  if (static_cast<int>(labels.size()) != n)
    throw ChainError(fmt::format("{} labels for {} states", labels.size(), n));
  if (jump_kernel.rows() != n || jump_kernel.cols() != n)
    throw ChainError(fmt::format("jump kernel is {}x{}, expected {}x{}",
                                 jump_kernel.rows(), jump_kernel.cols(), n, n));

  for (int x = 0; x < n; ++x) {
    if (n == 1) {
      if (exit_rates[x] != 0.0)
        throw ChainError(fmt::format("single-state chain requires q=0, got q[{}]={}",
                                     labels[x], exit_rates[x]));
      continue;
    }
    if (!(exit_rates[x] > 0.0))
      throw ChainError(fmt::format("exit rate of state {} must be positive, got {}",
                                   labels[x], exit_rates[x]));
  }
  for (int x = 0; x < n; ++x) {
    if (n == 1) break;
    if (jump_kernel(x, x) != 0.0)
      throw ChainError(fmt::format("jump kernel diagonal must be zero, P[{0},{0}]={1}",
                                   labels[x], jump_kernel(x, x)));
    double row_sum = 0.0;
    for (int y = 0; y < n; ++y) {
      if (jump_kernel(x, y) < 0.0)
        throw ChainError(fmt::format("negative kernel entry P[{},{}]={}", labels[x],
                                     labels[y], jump_kernel(x, y)));
      row_sum += jump_kernel(x, y);
    }
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw ChainError(fmt::format("kernel row {} sums to {}, expected 1", labels[x], row_sum));
  }
  if (!irreducible(jump_kernel))
    throw ChainError("jump kernel support graph is not strongly connected (reducible chain)");

  GeneratorMatrix g;
  g.labels = std::move(labels);
  g.exit_rates = exit_rates;
  g.jump_kernel = jump_kernel;
  g.rate_matrix = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    double off = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      g.rate_matrix(x, y) = exit_rates[x] * jump_kernel(x, y);
      off += g.rate_matrix(x, y);
    }
    g.rate_matrix(x, x) = -off;  // rows sum to zero by construction
  }
  return g;
}

GeneratorMatrix build_generator(const Eigen::VectorXd& exit_rates,
                                const Eigen::MatrixXd& jump_kernel) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(exit_rates.size()));
  for (int i = 0; i < exit_rates.size(); ++i) labels.push_back(std::to_string(i + 1));
  return build_generator(std::move(labels), exit_rates, jump_kernel);
}

Eigen::VectorXd stationary_distribution(const GeneratorMatrix& g) {
  const int n = g.size();
  if (n == 1) return Eigen::VectorXd::Ones(1);

  // pi Q = 0 with the normalization sum(pi) = 1 replacing one equation.
  Eigen::MatrixXd a = g.rate_matrix.transpose();
  a.row(0).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw NumericalError("stationary distribution solve: singular system");
  Eigen::VectorXd pi = lu.solve(rhs);

  const double residual = (pi.transpose() * g.rate_matrix).cwiseAbs().maxCoeff();
  if (residual > 1e-10)
    throw NumericalError(fmt::format("stationary distribution residual {} exceeds 1e-10", residual));
  for (int x = 0; x < n; ++x) {
    if (!(pi[x] > 0.0))
      throw NumericalError(fmt::format("stationary probability of state {} is {}", g.labels[x], pi[x]));
  }
  return pi;
}

Eigen::MatrixXd potential_matrix(const GeneratorMatrix& g, const Eigen::VectorXd& pi) {
  const int n = g.size();
  if (pi.size() != n) throw ChainError("pi dimension does not match generator");

  Eigen::MatrixXd projector = Eigen::VectorXd::Ones(n) * pi.transpose();
  const Eigen::MatrixXd a = projector - g.rate_matrix;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::MatrixXd inv = lu.solve(Eigen::MatrixXd::Identity(n, n));
  // one step of iterative refinement keeps the algebraic identities near
  // machine precision, which the perturbation residuals depend on
  inv += lu.solve(Eigen::MatrixXd::Identity(n, n) - a * inv);
  Eigen::MatrixXd r0 = inv - projector;

  const Eigen::MatrixXd target = projector - Eigen::MatrixXd::Identity(n, n);
  const double residual = (g.rate_matrix * r0 - target).cwiseAbs().maxCoeff();
  if (residual > 1e-8)
    throw NumericalError(fmt::format("potential matrix residual {} exceeds 1e-8", residual));
  return r0;
}

Eigen::MatrixXd transition_semigroup(const GeneratorMatrix& g, double t) {
  if (t < 0.0) throw ChainError(fmt::format("semigroup time must be nonnegative, got {}", t));
  return (g.rate_matrix * t).exp();
}

ChainAnalysis analyze(const GeneratorMatrix& g) {
  ChainAnalysis a;
  a.pi = stationary_distribution(g);
  a.projector = Eigen::VectorXd::Ones(g.size()) * a.pi.transpose();
  a.potential = potential_matrix(g, a.pi);
  return a;
}

JumpPath simulate_chain(const GeneratorMatrix& g, double horizon, double epsilon,
                        int initial_state, RngStream stream) {
  if (!(horizon > 0.0)) throw ChainError(fmt::format("horizon must be positive, got {}", horizon));
  if (!(epsilon > 0.0)) throw ChainError(fmt::format("epsilon must be positive, got {}", epsilon));
  const int n = g.size();
  if (initial_state < 0 || initial_state >= n)
    throw ChainError(fmt::format("initial state index {} out of range [0,{})", initial_state, n));

  JumpPath path;
  path.horizon = horizon;
  path.epsilon = epsilon;
  path.states.push_back(initial_state);

  int x = initial_state;
  double t = 0.0;
  while (true) {
    const double rate = g.exit_rates[x] / epsilon;
    if (rate <= 0.0) break;  // absorbing only in the single-state case
    t += stream.exponential(rate);
    if (t >= horizon) break;
    // next state from row x of P, inverse-CDF walk
    double u = stream.uniform();
    int next = -1;
    int last_reachable = -1;
    double acc = 0.0;
    for (int y = 0; y < n; ++y) {
      if (g.jump_kernel(x, y) <= 0.0) continue;
      last_reachable = y;
      acc += g.jump_kernel(x, y);
      if (u <= acc) {
        next = y;
        break;
      }
    }
    if (next < 0) next = last_reachable;  // acc fell short of 1 by rounding
    path.jump_times.push_back(t);
    path.states.push_back(next);
    x = next;
  }
  return path;
}

}  // namespace swavg::chain
