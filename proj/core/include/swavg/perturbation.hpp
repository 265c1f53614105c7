#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "swavg/chain.hpp"
#include "swavg/system.hpp"

namespace swavg::perturbation {

using chain::ChainAnalysis;
using chain::ChainError;
using chain::GeneratorMatrix;
using chain::NumericalError;
using system::VelocityField;

// Scalar test function with explicit first and second derivatives (d = 1).
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  [[nodiscard]] virtual std::string descriptor() const = 0;
  [[nodiscard]] virtual double value(double u) const = 0;
  [[nodiscard]] virtual double deriv(double u) const = 0;
  [[nodiscard]] virtual double second(double u) const = 0;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

// coeffs[k] multiplies u^k
TestFunctionPtr make_polynomial(std::vector<double> coeffs);

// C^2 bump supported on (center - radius, center + radius), peak value 1
TestFunctionPtr make_bump(double center, double radius);

using ScalarFn = std::function<double(double)>;

struct DifferentiableFn {
  ScalarFn value;
  ScalarFn deriv;  // may be empty when no derivative is available
};

// g(u;x) for x in the finite regime set
struct CoupledFunction {
  std::vector<DifferentiableFn> per_state;

  [[nodiscard]] int num_states() const { return static_cast<int>(per_state.size()); }
};

// Which of the two equivalent potential/centering conventions to use; both
// must produce the same corrector.
enum class SignConvention {
  kProjectorMinusIdentity,  // Q R0 = Pi - I, centered drift operator b - b_hat
  kIdentityMinusProjector,  // Q R0 = I - Pi, centered drift operator b_hat - b
};

// u -> b(u;x) phi'(u), with derivative b' phi' + b phi''
DifferentiableFn apply_drift_operator(const VelocityField& field, int state,
                                      const TestFunction& phi);

// u -> b_hat(u) phi'(u) for the pi-averaged drift
DifferentiableFn apply_averaged_operator(const VelocityField& field, const Eigen::VectorXd& pi,
                                         const TestFunction& phi);

// First-order corrector phi1(u;x) = sum_y R0[x,y] (b(u;y) - b_hat(u)) phi'(u).
// Because rows of R0 sum to zero this equals phi'(u) sum_y R0[x,y] b(u;y);
// evaluation cross-checks the two forms against each other.
CoupledFunction build_corrector(const TestFunction& phi, const VelocityField& field,
                                const ChainAnalysis& analysis,
                                SignConvention convention = SignConvention::kProjectorMinusIdentity);

// (u;x) -> eps^{-1} sum_y Q[x,y][g(u;y) - g(u;x)] + b(u;x) d_u g(u;x)
CoupledFunction apply_coupled_generator(double epsilon, const GeneratorMatrix& generator,
                                        const VelocityField& field, const CoupledFunction& g);

// u -> b(u;x) d_u phi1(u;x); the bounded first-order remainder
ScalarFn remainder_operator(const VelocityField& field, const ChainAnalysis& analysis, int state,
                            const TestFunction& phi);

struct ResidualRow {
  double u = 0.0;
  int state = 0;
  double lhs = 0.0;       // coupled generator applied to phi + eps phi1
  double rhs = 0.0;       // averaged term + eps * remainder
  double residual = 0.0;  // |lhs - rhs| / max(1, |lhs|, |rhs|)
};

struct PerturbationReport {
  std::vector<ResidualRow> rows;
  double max_residual = 0.0;
  double remainder_sup = 0.0;  // sup over the grid of |theta phi|
};

PerturbationReport residual_check(const TestFunction& phi, double epsilon,
                                  const GeneratorMatrix& generator, const VelocityField& field,
                                  const ChainAnalysis& analysis,
                                  const std::vector<double>& u_grid);

}  // namespace swavg::perturbation
