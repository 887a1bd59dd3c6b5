#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mfoc/fixed_point.hpp"

using namespace mfoc;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

ProblemSpec baseline_problem(int n, int nt) {
  TorusGrid g(1, n);
  Potential w =
      Potential::trigonometric({TrigMode{{1, 0, 0}, -1.0 / (4.0 * M_PI * M_PI), 0.0}});
  ScalarField V = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return 0.5 * std::cos(kTwoPi * x[0]); });
  Coupling coupling = Coupling::additive_nonlocal(V, w, g);
  ScalarField rho0 = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  ScalarField phiT = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
    return std::cos(kTwoPi * x[0]) / (4.0 * M_PI);
  });
  return make_problem(g, TimeMesh(0.5, nt), w, std::move(coupling), std::move(rho0),
                      std::move(phiT));
}

}  // namespace

TEST_CASE("budget constants reproduce an independent closed-form evaluation") {
  ProblemSpec spec = baseline_problem(64, 128);
  LipschitzBudget b = compute_budget(spec);

  // closed forms for the baseline data:
  //   sup|grad phi_T| = 1/2,  sup|phi_T| = 1/(4 pi)
  //   sup|hess W| = 1,        sup|grad W| = 1/(2 pi)
  //   sup|U| <= sup|V| + sup|W| = 1/2 + 1/(4 pi^2)
  //   sup|grad U| <= pi + 1/(2 pi)
  const double T = 0.5;
  const double u_sup = 0.5 + 1.0 / (4.0 * M_PI * M_PI);
  const double grad_u_sup = M_PI + 1.0 / kTwoPi;
  const double a_ref =
      0.5 + 1.0 * (0.5 * T + 2.0 / (4.0 * M_PI) + 2.0 * T * u_sup) + T * grad_u_sup;
  const double b_ref = 1.0 * (2.0 / kTwoPi + 1.0);

  CHECK(b.A == doctest::Approx(a_ref).epsilon(1e-3));
  CHECK(b.B == doctest::Approx(b_ref).epsilon(1e-3));
  CHECK(b.C == doctest::Approx(b.A * std::exp(b.B * T)).epsilon(1e-12));
  CHECK(b.envelope(T) == doctest::Approx(b.A).epsilon(1e-12));
  CHECK(b.envelope(0.0) == doctest::Approx(b.C).epsilon(1e-12));
}

TEST_CASE("the damped outer iteration converges and certifies on a reduced mesh") {
  ProblemSpec spec = baseline_problem(64, 128);
  SolveResult res = solve(spec, 0.5, 1e-6, 200);
  REQUIRE(res.pair.converged);
  CHECK(res.pair.final_residual <= 1e-6);
  CHECK(res.pair.iterations <= 200);

  // residuals decrease monotonically once defined
  for (std::size_t i = 2; i + 1 < res.log.rows.size(); ++i)
    CHECK(res.log.rows[i + 1].residual <= res.log.rows[i].residual);
  for (const auto& row : res.log.rows) CHECK_FALSE(row.budget_violation);

  LipschitzBudget budget = compute_budget(spec);
  CertificationReport cert = certify(spec, res.pair, budget, 1e-6);
  for (const auto& item : cert.items) {
    INFO(item.name, ": ", item.detail);
    CHECK(item.pass);
  }
}

TEST_CASE("one outer map application is deterministic") {
  ProblemSpec spec = baseline_problem(64, 64);
  ValueTrajectory phi = ValueTrajectory::constant_in_time(spec.mesh, spec.phiT);
  OuterMapResult a = apply_F(spec, phi);
  OuterMapResult b = apply_F(spec, phi);
  for (std::size_t k = 0; k < a.Phi.snaps.size(); ++k) {
    CHECK(sup_norm(a.Phi.snaps[k] - b.Phi.snaps[k]) == 0.0);
    CHECK(sup_norm(a.rho.snaps[k] - b.rho.snaps[k]) == 0.0);
  }
}

TEST_CASE("undamped and damped iterations land on the same fixed point") {
  ProblemSpec spec = baseline_problem(64, 64);
  SolveResult damped = solve(spec, 0.5, 1e-8, 200);
  SolveResult full = solve(spec, 1.0, 1e-8, 200);
  REQUIRE(damped.pair.converged);
  REQUIRE(full.pair.converged);
  double gap = sup_gap(damped.pair.Phi, full.pair.Phi);
  CHECK(gap < 1e-6);
}

TEST_CASE("non-convergence is reported, not thrown") {
  ProblemSpec spec = baseline_problem(64, 64);
  SolveResult res = solve(spec, 0.5, 1e-15, 2);
  CHECK_FALSE(res.pair.converged);
  CHECK(res.pair.iterations == 2);
  CHECK(res.pair.final_residual > 1e-15);
  // the last iterate is still a usable trajectory
  CHECK(res.pair.Phi.snaps.size() == static_cast<std::size_t>(spec.mesh.nt) + 1);
  CHECK(res.pair.rho.snaps.size() == res.pair.Phi.snaps.size());
}

TEST_CASE("parameter validation") {
  ProblemSpec spec = baseline_problem(64, 64);
  CHECK_THROWS(solve(spec, 0.0, 1e-6, 10));
  CHECK_THROWS(solve(spec, 1.5, 1e-6, 10));
  CHECK_THROWS(solve(spec, 0.5, -1.0, 10));
}
