#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swavg/chain.hpp"

namespace swavg::system {

using chain::ChainError;
using chain::NumericalError;

// Rectangular region of state space, used for condition checks and for
// on-domain fields (logistic).
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  [[nodiscard]] bool contains(const Eigen::VectorXd& u) const {
    return (u.array() >= lo.array()).all() && (u.array() <= hi.array()).all();
  }
};

// The drift family b(u;x) for x in a finite regime set, with u-Jacobian.
// growth_constant / lipschitz_constant are the declared constants of the
// linear-growth and Lipschitz conditions; absent means "estimate only".
// Fields with a non-global domain report it via invariant_box.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual int num_states() const = 0;
  [[nodiscard]] virtual Eigen::VectorXd eval(const Eigen::VectorXd& u, int state) const = 0;
  [[nodiscard]] virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, int state) const = 0;
  [[nodiscard]] virtual std::optional<double> growth_constant() const { return std::nullopt; }
  [[nodiscard]] virtual std::optional<double> lipschitz_constant() const { return std::nullopt; }
  [[nodiscard]] virtual std::optional<Box> invariant_box() const { return std::nullopt; }

  // scalar conveniences for d = 1
  [[nodiscard]] double value(double u, int state) const {
    return eval(Eigen::VectorXd::Constant(1, u), state)[0];
  }
  [[nodiscard]] double slope(double u, int state) const {
    return jacobian(Eigen::VectorXd::Constant(1, u), state)(0, 0);
  }
};

using FieldPtr = std::shared_ptr<const VelocityField>;

// catalog, all scalar (d = 1), parameters indexed by regime
FieldPtr make_constant_field(const Eigen::VectorXd& c);
FieldPtr make_linear_field(const Eigen::VectorXd& a, const Eigen::VectorXd& c);
FieldPtr make_trig_field(const Eigen::VectorXd& a, const Eigen::VectorXd& c);
FieldPtr make_logistic_field(const Eigen::VectorXd& r, const Eigen::VectorXd& k);

// d > 1 by componentwise composition of scalar fields
FieldPtr make_componentwise_field(std::vector<FieldPtr> components);

// single-regime field b_hat(u) = sum_x pi[x] b(u;x)
FieldPtr averaged_drift(FieldPtr field, const Eigen::VectorXd& pi);

struct SwitchedPath {
  std::vector<double> times;             // strictly increasing, includes jump times
  std::vector<Eigen::VectorXd> values;   // u at grid points
  std::vector<int> regimes;              // regime on [times[i], times[i+1])
  double epsilon = 1.0;
  double step_bound = 0.0;               // h_max actually used
};

struct AveragedPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  double step_bound = 0.0;
};

// Classical 4th-order fixed-step integration of du/dt = b(u; regime(t)),
// regime switching exactly at the jump times of the path; u is continuous
// across jumps. extra_times are forced onto the grid.
SwitchedPath integrate_switched(const VelocityField& field, const chain::JumpPath& jumps,
                                const Eigen::VectorXd& u0, double h_max,
                                const std::vector<double>& extra_times = {});

// Same one-step method for the single-regime averaged system.
AveragedPath integrate_averaged(const VelocityField& averaged, const Eigen::VectorXd& u0,
                                double horizon, double h_max,
                                const std::vector<double>& extra_times = {});

// Cubic Hermite evaluation between grid points; node derivatives come from
// the field itself.
Eigen::VectorXd eval_averaged(const AveragedPath& path, const VelocityField& averaged, double t);

struct ConditionReport {
  double growth_estimate = 0.0;     // max |b(u;x)| / (1 + |u|)
  double lipschitz_estimate = 0.0;  // max |b(u;x)-b(u';x)| / |u-u'|
  bool growth_ok = false;           // vs declared constant, when present
  bool lipschitz_ok = false;
  bool restricted_domain = false;   // sampling was clipped to the field's box
};

ConditionReport check_conditions(const VelocityField& field, const Box& box,
                                 int points_per_axis);

}  // namespace swavg::system
