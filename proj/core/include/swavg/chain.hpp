#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "swavg/rng.hpp"

namespace swavg::chain {

/// Invalid chain specification (dimension mismatch, bad rates, reducibility).
class ChainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear solve or identity check failed beyond tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxStates = 64;

// Finite-state CTMC generator Q[x,y] = q[x]*P[x,y] off-diagonal,
// Q[x,x] = -q[x]. P has zero diagonal; self-jumps are not representable.
struct GeneratorMatrix {
  std::vector<std::string> labels;
  Eigen::VectorXd exit_rates;   // q
  Eigen::MatrixXd jump_kernel;  // P, row-stochastic, zero diagonal
  Eigen::MatrixXd rate_matrix;  // Q

  [[nodiscard]] int size() const { return static_cast<int>(exit_rates.size()); }
};

// Stationary distribution pi, rank-one projector Pi (all rows equal pi),
// and the potential (deviation) matrix R0 with Q R0 = R0 Q = Pi - I,
// Pi R0 = R0 Pi = 0.
struct ChainAnalysis {
  Eigen::VectorXd pi;
  Eigen::MatrixXd projector;  // Pi
  Eigen::MatrixXd potential;  // R0
};

// One exact sample of the regime process at time scale t/epsilon.
struct JumpPath {
  double horizon = 0.0;
  double epsilon = 1.0;
  std::vector<double> jump_times;  // strictly increasing, all < horizon
  std::vector<int> states;         // jump_times.size() + 1 entries
  std::uint64_t stream_key = 0;

  [[nodiscard]] int state_at(double t) const;
};

GeneratorMatrix build_generator(std::vector<std::string> labels,
                                const Eigen::VectorXd& exit_rates,
                                const Eigen::MatrixXd& jump_kernel);
GeneratorMatrix build_generator(const Eigen::VectorXd& exit_rates,
                                const Eigen::MatrixXd& jump_kernel);

Eigen::VectorXd stationary_distribution(const GeneratorMatrix& g);

// R0 via the linear solve (Pi - Q)^{-1} - Pi.
Eigen::MatrixXd potential_matrix(const GeneratorMatrix& g, const Eigen::VectorXd& pi);

// exp(Q t); test oracle for potential_matrix and simulate_chain.
Eigen::MatrixXd transition_semigroup(const GeneratorMatrix& g, double t);

ChainAnalysis analyze(const GeneratorMatrix& g);

JumpPath simulate_chain(const GeneratorMatrix& g, double horizon, double epsilon,
                        int initial_state, RngStream stream);

}  // namespace swavg::chain
