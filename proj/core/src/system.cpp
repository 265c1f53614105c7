#include "swavg/system.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/core.h>

namespace swavg::system {

namespace {

class ScalarCatalogField : public VelocityField {
 public:
  ScalarCatalogField(std::string id, int states) : id_(std::move(id)), states_(states) {}

  [[nodiscard]] std::string id() const override { return id_; }
  [[nodiscard]] int dim() const override { return 1; }
  [[nodiscard]] int num_states() const override { return states_; }

  [[nodiscard]] Eigen::VectorXd eval(const Eigen::VectorXd& u, int state) const override {
    check(u, state);
    return Eigen::VectorXd::Constant(1, value_at(u[0], state));
  }
  [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, int state) const override {
    check(u, state);
    return Eigen::MatrixXd::Constant(1, 1, slope_at(u[0], state));
  }

 protected:
  [[nodiscard]] virtual double value_at(double u, int state) const = 0;
  [[nodiscard]] virtual double slope_at(double u, int state) const = 0;

 private:
  void check(const Eigen::VectorXd& u, int state) const {
    if (u.size() != 1) throw ChainError(fmt::format("field {} is scalar, got dim {}", id_, u.size()));
    if (state < 0 || state >= states_)
      throw ChainError(fmt::format("field {}: regime {} out of range [0,{})", id_, state, states_));
  }

  std::string id_;
  int states_;
};

class ConstantField final : public ScalarCatalogField {
 public:
  explicit ConstantField(Eigen::VectorXd c)
      : ScalarCatalogField("constant", static_cast<int>(c.size())), c_(std::move(c)) {}

  [[nodiscard]] std::optional<double> growth_constant() const override {
    return c_.cwiseAbs().maxCoeff();
  }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override { return 0.0; }

 private:
  [[nodiscard]] double value_at(double, int x) const override { return c_[x]; }
  [[nodiscard]] double slope_at(double, int) const override { return 0.0; }

  Eigen::VectorXd c_;
};

class LinearField final : public ScalarCatalogField {
 public:
  LinearField(Eigen::VectorXd a, Eigen::VectorXd c)
      : ScalarCatalogField("linear", static_cast<int>(a.size())),
        a_(std::move(a)),
        c_(std::move(c)) {
    if (a_.size() != c_.size()) throw ChainError("linear field: a and c sizes differ");
  }

  [[nodiscard]] std::optional<double> growth_constant() const override {
    // |a u + c| <= max(|a|,|c|)(1+|u|)
    return a_.cwiseAbs().cwiseMax(c_.cwiseAbs()).maxCoeff();
  }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override {
    return a_.cwiseAbs().maxCoeff();
  }

 private:
  [[nodiscard]] double value_at(double u, int x) const override { return a_[x] * u + c_[x]; }
  [[nodiscard]] double slope_at(double, int x) const override { return a_[x]; }

  Eigen::VectorXd a_;
  Eigen::VectorXd c_;
};

class TrigField final : public ScalarCatalogField {
 public:
  TrigField(Eigen::VectorXd a, Eigen::VectorXd c)
      : ScalarCatalogField("bounded-trig", static_cast<int>(a.size())),
        a_(std::move(a)),
        c_(std::move(c)) {
    if (a_.size() != c_.size()) throw ChainError("bounded-trig field: a and c sizes differ");
  }

  [[nodiscard]] std::optional<double> growth_constant() const override {
    return (a_.cwiseAbs() + c_.cwiseAbs()).maxCoeff();
  }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override {
    return a_.cwiseAbs().maxCoeff();
  }

 private:
  [[nodiscard]] double value_at(double u, int x) const override {
    return a_[x] * std::sin(u) + c_[x];
  }
  [[nodiscard]] double slope_at(double u, int x) const override { return a_[x] * std::cos(u); }

  Eigen::VectorXd a_;
  Eigen::VectorXd c_;
};

// b = r u (1 - u/K); conditions I, II hold only on [0, max K], reported as
// the invariant box.
class LogisticField final : public ScalarCatalogField {
 public:
  LogisticField(Eigen::VectorXd r, Eigen::VectorXd k)
      : ScalarCatalogField("logistic", static_cast<int>(r.size())),
        r_(std::move(r)),
        k_(std::move(k)) {
    if (r_.size() != k_.size()) throw ChainError("logistic field: r and K sizes differ");
    for (int x = 0; x < k_.size(); ++x)
      if (!(k_[x] > 0.0))
        throw ChainError(fmt::format("logistic field: K[{}]={} must be positive", x, k_[x]));
    k_max_ = k_.maxCoeff();
    double sup_b = 0.0;
    double sup_db = 0.0;
    for (int x = 0; x < r_.size(); ++x) {
      // on [0, k_max]: |b| peaks at u = K/2 or at the right edge
      const double at_peak = std::abs(r_[x]) * k_[x] / 4.0;
      const double at_edge = std::abs(r_[x] * k_max_ * (1.0 - k_max_ / k_[x]));
      sup_b = std::max({sup_b, at_peak, at_edge});
      sup_db = std::max(sup_db, std::abs(r_[x]) * std::max(1.0, 2.0 * k_max_ / k_[x] - 1.0));
    }
    growth_ = sup_b;
    lipschitz_ = sup_db;
  }

  [[nodiscard]] std::optional<double> growth_constant() const override { return growth_; }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override { return lipschitz_; }
  [[nodiscard]] std::optional<Box> invariant_box() const override {
    return Box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, k_max_)};
  }

 private:
  [[nodiscard]] double value_at(double u, int x) const override {
    return r_[x] * u * (1.0 - u / k_[x]);
  }
  [[nodiscard]] double slope_at(double u, int x) const override {
    return r_[x] * (1.0 - 2.0 * u / k_[x]);
  }

  Eigen::VectorXd r_;
  Eigen::VectorXd k_;
  double k_max_ = 0.0;
  double growth_ = 0.0;
  double lipschitz_ = 0.0;
};

class ComponentwiseField final : public VelocityField {
 public:
  explicit ComponentwiseField(std::vector<FieldPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ChainError("componentwise field needs at least one component");
    for (const auto& p : parts_) {
      if (p->dim() != 1) throw ChainError("componentwise field composes scalar fields only");
      if (p->num_states() != parts_.front()->num_states())
        throw ChainError("componentwise field: regime counts differ between components");
    }
  }

  [[nodiscard]] std::string id() const override { return "componentwise"; }
  [[nodiscard]] int dim() const override { return static_cast<int>(parts_.size()); }
  [[nodiscard]] int num_states() const override { return parts_.front()->num_states(); }

  [[nodiscard]] Eigen::VectorXd eval(const Eigen::VectorXd& u, int state) const override {
    Eigen::VectorXd out(dim());
    for (int i = 0; i < dim(); ++i) out[i] = parts_[i]->value(u[i], state);
    return out;
  }
  [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, int state) const override {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) jac(i, i) = parts_[i]->slope(u[i], state);
    return jac;
  }
  [[nodiscard]] std::optional<double> growth_constant() const override {
    double acc = 0.0;
    for (const auto& p : parts_) {
      auto l = p->growth_constant();
      if (!l) return std::nullopt;
      acc = std::max(acc, *l);
    }
    return acc * std::sqrt(static_cast<double>(dim()));
  }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override {
    double acc = 0.0;
    for (const auto& p : parts_) {
      auto c = p->lipschitz_constant();
      if (!c) return std::nullopt;
      acc = std::max(acc, *c);
    }
    return acc;
  }

 private:
  std::vector<FieldPtr> parts_;
};

class AveragedField final : public VelocityField {
 public:
  AveragedField(FieldPtr base, Eigen::VectorXd pi) : base_(std::move(base)), pi_(std::move(pi)) {
    if (pi_.size() != base_->num_states())
      throw ChainError(fmt::format("averaged drift: pi has {} entries for {} regimes",
                                   pi_.size(), base_->num_states()));
  }

  [[nodiscard]] std::string id() const override { return "averaged(" + base_->id() + ")"; }
  [[nodiscard]] int dim() const override { return base_->dim(); }
  [[nodiscard]] int num_states() const override { return 1; }

  [[nodiscard]] Eigen::VectorXd eval(const Eigen::VectorXd& u, int) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (int x = 0; x < pi_.size(); ++x) out += pi_[x] * base_->eval(u, x);
    return out;
  }
  [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, int) const override {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), dim());
    for (int x = 0; x < pi_.size(); ++x) out += pi_[x] * base_->jacobian(u, x);
    return out;
  }
  [[nodiscard]] std::optional<double> growth_constant() const override {
    return base_->growth_constant();
  }
  [[nodiscard]] std::optional<double> lipschitz_constant() const override {
    return base_->lipschitz_constant();
  }
  [[nodiscard]] std::optional<Box> invariant_box() const override { return base_->invariant_box(); }

 private:
  FieldPtr base_;
  Eigen::VectorXd pi_;
};

Eigen::VectorXd rk4_step(const VelocityField& field, int state, const Eigen::VectorXd& u,
                         double h) {
  const Eigen::VectorXd k1 = field.eval(u, state);
  const Eigen::VectorXd k2 = field.eval(u + 0.5 * h * k1, state);
  const Eigen::VectorXd k3 = field.eval(u + 0.5 * h * k2, state);
  const Eigen::VectorXd k4 = field.eval(u + h * k3, state);
  return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<double> merge_grid(double horizon, const std::vector<double>& jumps,
                               const std::vector<double>& extra) {
  std::vector<double> grid;
  grid.reserve(jumps.size() + extra.size() + 2);
  grid.push_back(0.0);
  grid.push_back(horizon);
  grid.insert(grid.end(), jumps.begin(), jumps.end());
  for (double t : extra)
    if (t > 0.0 && t < horizon) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace

FieldPtr make_constant_field(const Eigen::VectorXd& c) {
  return std::make_shared<ConstantField>(c);
}
FieldPtr make_linear_field(const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
  return std::make_shared<LinearField>(a, c);
}
FieldPtr make_trig_field(const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
  return std::make_shared<TrigField>(a, c);
}
FieldPtr make_logistic_field(const Eigen::VectorXd& r, const Eigen::VectorXd& k) {
  return std::make_shared<LogisticField>(r, k);
}
FieldPtr make_componentwise_field(std::vector<FieldPtr> components) {
  return std::make_shared<ComponentwiseField>(std::move(components));
}
FieldPtr averaged_drift(FieldPtr field, const Eigen::VectorXd& pi) {
  return std::make_shared<AveragedField>(std::move(field), pi);
}

SwitchedPath integrate_switched(const VelocityField& field, const chain::JumpPath& jumps,
                                const Eigen::VectorXd& u0, double h_max,
                                const std::vector<double>& extra_times) {
  if (!(h_max > 0.0)) throw ChainError("h_max must be positive");
  const auto breakpoints = merge_grid(jumps.horizon, jumps.jump_times, extra_times);

  SwitchedPath path;
  path.epsilon = jumps.epsilon;
  path.step_bound = h_max;
  path.times.push_back(0.0);
  path.values.push_back(u0);
  path.regimes.push_back(jumps.states.front());

  Eigen::VectorXd u = u0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double a = breakpoints[i];
    const double b = breakpoints[i + 1];
    const int regime = jumps.state_at(a);
    const int n_steps = std::max(1, static_cast<int>(std::ceil((b - a) / h_max - 1e-12)));
    const double h = (b - a) / n_steps;
    for (int s = 0; s < n_steps; ++s) {
      u = rk4_step(field, regime, u, h);
      if (!u.allFinite())
        throw NumericalError(fmt::format("switched trajectory left the finite range at t={}",
                                         a + (s + 1) * h));
      const double t = s + 1 == n_steps ? b : a + (s + 1) * h;
      path.times.push_back(t);
      path.values.push_back(u);
      path.regimes.push_back(jumps.state_at(t));
    }
  }
  return path;
}

AveragedPath integrate_averaged(const VelocityField& averaged, const Eigen::VectorXd& u0,
                                double horizon, double h_max,
                                const std::vector<double>& extra_times) {
  if (!(horizon > 0.0)) throw ChainError(fmt::format("horizon must be positive, got {}", horizon));
  if (averaged.num_states() != 1)
    throw ChainError("integrate_averaged expects a single-regime field");
  chain::JumpPath still;
  still.horizon = horizon;
  still.epsilon = 1.0;
  still.states.push_back(0);
  const SwitchedPath sw = integrate_switched(averaged, still, u0, h_max, extra_times);
  AveragedPath path;
  path.times = sw.times;
  path.values = sw.values;
  path.step_bound = h_max;
  return path;
}

Eigen::VectorXd eval_averaged(const AveragedPath& path, const VelocityField& averaged, double t) {
  if (path.times.empty()) throw ChainError("empty averaged path");
  if (t <= path.times.front()) return path.values.front();
  if (t >= path.times.back()) return path.values.back();
  const auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - path.times.begin());
  const std::size_t lo = hi - 1;
  const double h = path.times[hi] - path.times[lo];
  const double s = (t - path.times[lo]) / h;
  if (s <= 0.0) return path.values[lo];
  const Eigen::VectorXd m0 = averaged.eval(path.values[lo], 0);
  const Eigen::VectorXd m1 = averaged.eval(path.values[hi], 0);
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * path.values[lo] + h10 * h * m0 + h01 * path.values[hi] + h11 * h * m1;
}

ConditionReport check_conditions(const VelocityField& field, const Box& box,
                                 int points_per_axis) {
  if (points_per_axis < 2) throw ChainError("condition check needs at least 2 points per axis");
  const int d = field.dim();
  if (box.lo.size() != d || box.hi.size() != d)
    throw ChainError("condition check: box dimension does not match field");

  Box region = box;
  bool restricted = false;
  if (auto domain = field.invariant_box()) {
    region.lo = region.lo.cwiseMax(domain->lo);
    region.hi = region.hi.cwiseMin(domain->hi);
    restricted = true;
  }
  for (int i = 0; i < d; ++i)
    if (!(region.lo[i] < region.hi[i])) throw ChainError("condition check: empty sampling region");

  // full cartesian grid; intended for small d
  std::vector<Eigen::VectorXd> points;
  std::vector<int> index(d, 0);
  while (true) {
    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i)
      u[i] = region.lo[i] +
             (region.hi[i] - region.lo[i]) * index[i] / static_cast<double>(points_per_axis - 1);
    points.push_back(u);
    int axis = 0;
    while (axis < d && ++index[axis] == points_per_axis) index[axis++] = 0;
    if (axis == d) break;
  }

  ConditionReport report;
  report.restricted_domain = restricted;
  for (int x = 0; x < field.num_states(); ++x) {
    std::vector<Eigen::VectorXd> vals(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) vals[i] = field.eval(points[i], x);
    for (std::size_t i = 0; i < points.size(); ++i) {
      report.growth_estimate =
          std::max(report.growth_estimate, vals[i].norm() / (1.0 + points[i].norm()));
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        const double du = (points[i] - points[j]).norm();
        if (du == 0.0) continue;
        report.lipschitz_estimate =
            std::max(report.lipschitz_estimate, (vals[i] - vals[j]).norm() / du);
      }
    }
  }

  const auto declared_growth = field.growth_constant();
  const auto declared_lipschitz = field.lipschitz_constant();
  report.growth_ok = declared_growth
                         ? report.growth_estimate <= *declared_growth * (1.0 + 1e-9) + 1e-12
                         : std::isfinite(report.growth_estimate);
  report.lipschitz_ok =
      declared_lipschitz ? report.lipschitz_estimate <= *declared_lipschitz * (1.0 + 1e-9) + 1e-12
                         : std::isfinite(report.lipschitz_estimate);
  return report;
}

}  // namespace swavg::system
