#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "swavg/perturbation.hpp"

using namespace swavg;
using swavg::testing::random_irreducible_generator;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

chain::GeneratorMatrix two_state() {
  Eigen::VectorXd q(2);
  q << 1.0, 2.0;
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  return chain::build_generator(q, p);
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

}  // namespace

TEST_CASE("polynomial and bump derivatives agree with central differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::vector<perturbation::TestFunctionPtr> fns;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> c;
    for (int k = 0; k <= 4; ++k) c.push_back(coeff(rng));
    fns.push_back(perturbation::make_polynomial(c));
  }
  fns.push_back(perturbation::make_bump(0.0, 2.0));
  fns.push_back(perturbation::make_bump(1.5, 0.7));

  const double h = 1e-5;
  for (const auto& f : fns) {
    for (double u : grid(-1.8, 1.8, 19)) {
      const double d1 = (f->value(u + h) - f->value(u - h)) / (2.0 * h);
      const double d2 = (f->value(u + h) - 2.0 * f->value(u) + f->value(u - h)) / (h * h);
      CHECK(f->deriv(u) == doctest::Approx(d1).epsilon(1e-6).scale(1.0));
      CHECK(f->second(u) == doctest::Approx(d2).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("bump is compactly supported and C^2 at the edge") {
  const auto b = perturbation::make_bump(0.0, 1.0);
  CHECK(b->value(0.0) == 1.0);
  for (double u : {1.0, 1.5, -1.0, -3.0}) {
    CHECK(b->value(u) == 0.0);
    CHECK(b->deriv(u) == 0.0);
    CHECK(b->second(u) == 0.0);
  }
  CHECK(std::abs(b->value(0.999)) < 1e-100);
}

TEST_CASE("drift operator examples") {
  const auto phi_u = perturbation::make_polynomial({0.0, 1.0});
  const auto phi_u2 = perturbation::make_polynomial({0.0, 0.0, 1.0});
  const auto phi_c = perturbation::make_polynomial({4.2});
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));

  auto b1 = perturbation::apply_drift_operator(*linear, 0, *phi_u);
  CHECK(b1.value(2.0) == 6.0);  // b(u;1) phi' = 3u
  auto b2 = perturbation::apply_drift_operator(*linear, 1, *phi_u2);
  CHECK(b2.value(2.0) == -24.0);  // (-3u)(2u) = -6u^2
  CHECK(b2.deriv(2.0) == doctest::Approx(-24.0).epsilon(1e-14));  // -12u
  auto b3 = perturbation::apply_drift_operator(*linear, 0, *phi_c);
  CHECK(b3.value(5.0) == 0.0);
}

TEST_CASE("averaged operator examples") {
  const auto phi_u = perturbation::make_polynomial({0.0, 1.0});
  const auto phi_c = perturbation::make_polynomial({1.0});
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));
  const Eigen::VectorXd pi = vec2(2.0 / 3.0, 1.0 / 3.0);

  auto hat = perturbation::apply_averaged_operator(*linear, pi, *phi_u);
  for (double u : {-1.0, 0.5, 2.0}) CHECK(hat.value(u) == doctest::Approx(u).epsilon(1e-14));

  const auto single = system::make_linear_field(Eigen::VectorXd::Constant(1, 2.0),
                                                Eigen::VectorXd::Zero(1));
  auto hat1 = perturbation::apply_averaged_operator(*single, Eigen::VectorXd::Ones(1), *phi_u);
  auto plain = perturbation::apply_drift_operator(*single, 0, *phi_u);
  CHECK(hat1.value(1.3) == plain.value(1.3));

  auto flat = perturbation::apply_averaged_operator(*linear, pi, *phi_c);
  CHECK(flat.value(3.0) == 0.0);
}

TEST_CASE("corrector for the two-state linear scenario") {
  const auto g = two_state();
  const auto analysis = chain::analyze(g);
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));
  const auto phi_u = perturbation::make_polynomial({0.0, 1.0});

  const auto phi1 = perturbation::build_corrector(*phi_u, *linear, analysis);
  // R0 row 1 = (1/9, -1/9): phi1(u;1) = (1/9*3 + 1/9*3) u = (2/3) u
  // R0 row 2 = (-2/9, 2/9): phi1(u;2) = (-2/9*3 - 2/9*3) u = -(4/3) u
  for (double u : {-2.0, 1.0, 3.5}) {
    CHECK(phi1.per_state[0].value(u) == doctest::Approx(2.0 / 3.0 * u).epsilon(1e-12));
    CHECK(phi1.per_state[1].value(u) == doctest::Approx(-4.0 / 3.0 * u).epsilon(1e-12));
    CHECK(phi1.per_state[0].deriv(u) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  const auto phi_c = perturbation::make_polynomial({7.0});
  const auto zero = perturbation::build_corrector(*phi_c, *linear, analysis);
  CHECK(zero.per_state[0].value(1.0) == 0.0);
  CHECK(zero.per_state[1].value(1.0) == 0.0);

  const auto one = chain::build_generator(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1));
  const auto single = system::make_linear_field(Eigen::VectorXd::Constant(1, 3.0),
                                                Eigen::VectorXd::Zero(1));
  const auto none = perturbation::build_corrector(*phi_u, *single, chain::analyze(one));
  CHECK(none.per_state[0].value(2.0) == 0.0);
}

TEST_CASE("corrector is invariant under the opposite sign convention") {
  const auto g = two_state();
  const auto analysis = chain::analyze(g);
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.5, -0.25));
  const auto phi = perturbation::make_polynomial({0.0, 1.0, 0.5, 0.0, 0.125});

  const auto a = perturbation::build_corrector(*phi, *linear, analysis,
                                               perturbation::SignConvention::kProjectorMinusIdentity);
  const auto b = perturbation::build_corrector(*phi, *linear, analysis,
                                               perturbation::SignConvention::kIdentityMinusProjector);
  for (double u : grid(-5.0, 5.0, 21)) {
    for (int x = 0; x < 2; ++x) {
      CHECK(a.per_state[static_cast<std::size_t>(x)].value(u) ==
            doctest::Approx(b.per_state[static_cast<std::size_t>(x)].value(u))
                .epsilon(1e-12)
                .scale(1.0));
    }
  }
}

TEST_CASE("coupled generator") {
  const auto g = two_state();
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));

  // x-independent argument: the fast part must vanish exactly
  perturbation::CoupledFunction flat;
  for (int x = 0; x < 2; ++x)
    flat.per_state.push_back({[](double u) { return u * u; }, [](double u) { return 2.0 * u; }});
  const auto lf = perturbation::apply_coupled_generator(1e-6, g, *linear, flat);
  CHECK(lf.per_state[0].value(2.0) == 3.0 * 2.0 * 2.0 * 2.0);   // B(1) u^2 = 3u * 2u
  CHECK(lf.per_state[1].value(2.0) == -3.0 * 2.0 * 2.0 * 2.0);

  // state-weighted linear combination, checked by hand:
  // g(u;1) = u, g(u;2) = 2u; (Qg)(u;1) = Q[1,2](2u - u) = u
  perturbation::CoupledFunction weighted;
  weighted.per_state.push_back({[](double u) { return u; }, [](double) { return 1.0; }});
  weighted.per_state.push_back({[](double u) { return 2.0 * u; }, [](double) { return 2.0; }});
  const auto lw = perturbation::apply_coupled_generator(0.5, g, *linear, weighted);
  // eps^{-1} u + b(u;1) * 1 = 2u + 3u
  CHECK(lw.per_state[0].value(1.0) == doctest::Approx(5.0).epsilon(1e-14));
  // eps^{-1} Q[2,1](u - 2u) + b(u;2) * 2 = -4u - 6u
  CHECK(lw.per_state[1].value(1.0) == doctest::Approx(-10.0).epsilon(1e-14));

  perturbation::CoupledFunction zero;
  for (int x = 0; x < 2; ++x)
    zero.per_state.push_back({[](double) { return 0.0; }, [](double) { return 0.0; }});
  CHECK(perturbation::apply_coupled_generator(1.0, g, *linear, zero).per_state[0].value(9.0) ==
        0.0);

  perturbation::CoupledFunction no_deriv;
  for (int x = 0; x < 2; ++x)
    no_deriv.per_state.push_back({[](double u) { return u; }, perturbation::ScalarFn{}});
  CHECK_THROWS_AS(perturbation::apply_coupled_generator(1.0, g, *linear, no_deriv),
                  chain::ChainError);
}

TEST_CASE("remainder operator on the two-state scenario") {
  const auto g = two_state();
  const auto analysis = chain::analyze(g);
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));
  const auto phi_u = perturbation::make_polynomial({0.0, 1.0});

  auto theta1 = perturbation::remainder_operator(*linear, analysis, 0, *phi_u);
  auto theta2 = perturbation::remainder_operator(*linear, analysis, 1, *phi_u);
  for (double u : {-1.0, 0.5, 2.0}) {
    CHECK(theta1(u) == doctest::Approx(2.0 * u).epsilon(1e-12).scale(1.0));   // 3u * 2/3
    CHECK(theta2(u) == doctest::Approx(4.0 * u).epsilon(1e-12).scale(1.0));   // -3u * -4/3
  }

  const auto phi_c = perturbation::make_polynomial({1.0});
  CHECK(perturbation::remainder_operator(*linear, analysis, 0, *phi_c)(2.0) == 0.0);
}

TEST_CASE("expansion identity for the two-state scenario is exact") {
  const auto g = two_state();
  const auto analysis = chain::analyze(g);
  const auto linear = system::make_linear_field(vec2(3.0, -3.0), vec2(0.0, 0.0));
  const auto phi_u = perturbation::make_polynomial({0.0, 1.0});

  for (double eps : {1.0, 0.1, 0.001}) {
    const auto report =
        perturbation::residual_check(*phi_u, eps, g, *linear, analysis, grid(-10.0, 10.0, 41));
    CHECK(report.max_residual <= 1e-12);
    for (const auto& row : report.rows) {
      // lhs = u + 2 eps u in regime 1 and u + 4 eps u in regime 2
      const double expected =
          row.state == 0 ? row.u * (1.0 + 2.0 * eps) : row.u * (1.0 + 4.0 * eps);
      CHECK(row.lhs == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("expansion identity over random chains and polynomials") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const auto g = random_irreducible_generator(n, rng);
    const auto analysis = chain::analyze(g);
    Eigen::VectorXd a(n);
    Eigen::VectorXd c(n);
    for (int x = 0; x < n; ++x) {
      a[x] = 3.0 * coeff(rng);
      c[x] = coeff(rng);
    }
    const auto field = system::make_linear_field(a, c);
    std::vector<double> pc;
    for (int k = 0; k <= 4; ++k) pc.push_back(coeff(rng));
    const auto phi = perturbation::make_polynomial(pc);

    for (double eps : {1.0, 0.1, 0.001}) {
      const auto report =
          perturbation::residual_check(*phi, eps, g, *field, analysis, grid(-10.0, 10.0, 21));
      CHECK(report.max_residual <= 1e-10);
    }
  }
}

TEST_CASE("pi-centering of the centered drift operator") {
  std::mt19937_64 rng(55);
  const auto g = random_irreducible_generator(4, rng);
  const auto analysis = chain::analyze(g);
  Eigen::VectorXd a(4), c(4);
  a << 1.0, -2.0, 0.5, 3.0;
  c << 0.1, 0.0, -0.4, 0.2;
  const auto field = system::make_linear_field(a, c);
  const auto phi = perturbation::make_polynomial({0.0, 1.0, 0.0, 0.5});

  const auto hat = perturbation::apply_averaged_operator(*field, analysis.pi, *phi);
  for (double u : grid(-3.0, 3.0, 13)) {
    double acc = 0.0;
    for (int x = 0; x < 4; ++x) {
      const auto bx = perturbation::apply_drift_operator(*field, x, *phi);
      acc += analysis.pi[x] * (bx.value(u) - hat.value(u));
    }
    CHECK(std::abs(acc) <= 1e-12 * std::max(1.0, std::abs(hat.value(u))));
  }
}

TEST_CASE("remainder stays bounded for bounded fields and compact phi") {
  const auto g = two_state();
  const auto analysis = chain::analyze(g);
  const auto trig = system::make_trig_field(vec2(1.0, -0.7), vec2(0.2, 0.1));
  const auto bump = perturbation::make_bump(0.0, 3.0);

  const auto report =
      perturbation::residual_check(*bump, 0.01, g, *trig, analysis, grid(-10.0, 10.0, 201));
  CHECK(std::isfinite(report.remainder_sup));
  CHECK(report.remainder_sup > 0.0);
  CHECK(report.remainder_sup < 100.0);
}
