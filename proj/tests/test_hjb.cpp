#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mfoc/fokker_planck.hpp"
#include "mfoc/hjb.hpp"

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

ProblemSpec constant_coupling_problem(double c, int n, int nt) {
  TorusGrid g(1, n);
  return make_problem(g, TimeMesh(0.5, nt), Potential::zero_potential(),
                      Coupling::constant(c), ScalarField(g, 1.0), ScalarField(g, 0.0));
}

/// Source assembled from the first forward sweep, as the outer iteration does.
SourceAssembly first_sweep_source(const ProblemSpec& spec) {
  ValueTrajectory phi = ValueTrajectory::constant_in_time(spec.mesh, spec.phiT);
  DensityTrajectory rho = fp_solve(spec, phi);
  return assemble_source(spec, rho, phi);
}

double trajectory_gap(const ValueTrajectory& a, const ValueTrajectory& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.snaps.size(); ++k)
    m = std::max(m, sup_norm(a.snaps[k] - b.snaps[k]));
  return m;
}

}  // namespace

TEST_CASE("a spatially constant source integrates exactly backwards") {
  // no interaction, coupling c: the value is c (T - t) at every node,
  // and raising the coupling raises the value by exactly the same amount
  const double c = 0.8;
  ProblemSpec spec = constant_coupling_problem(c, 32, 64);
  ValueTrajectory phi = ValueTrajectory::constant_in_time(spec.mesh, spec.phiT);
  DensityTrajectory rho = fp_solve(spec, phi);
  SourceAssembly src = assemble_source(spec, rho, phi);
  ValueTrajectory hc = hopf_cole_solve(spec, src);
  ValueTrajectory direct = hjb_direct_solve(spec, src);
  for (int k = 0; k <= spec.mesh.nt; ++k) {
    const double expected = c * (spec.mesh.T - spec.mesh.time(k));
    CHECK(sup_norm(hc.at(k) - ScalarField(spec.grid, expected)) < 1e-12);
    CHECK(sup_norm(direct.at(k) - ScalarField(spec.grid, expected)) < 1e-12);
  }

  ProblemSpec spec2 = constant_coupling_problem(2.0 * c, 32, 64);
  ValueTrajectory hc2 =
      hopf_cole_solve(spec2, first_sweep_source(spec2));
  CHECK(hc2.at(0).values[0] - hc.at(0).values[0] ==
        doctest::Approx(c * spec.mesh.T).epsilon(1e-12));
}

TEST_CASE("the zero problem has the zero value function") {
  ProblemSpec spec = constant_coupling_problem(0.0, 32, 64);
  ValueTrajectory hc = hopf_cole_solve(spec, first_sweep_source(spec));
  for (const auto& s : hc.snaps) CHECK(sup_norm(s) < 1e-14);
}

TEST_CASE("transformed and direct solvers agree on the baseline to scheme accuracy") {
  ProblemSpec spec = baseline_problem(64, 512);
  SourceAssembly src = first_sweep_source(spec);
  ValueTrajectory hc = hopf_cole_solve(spec, src);
  ValueTrajectory direct = hjb_direct_solve(spec, src);
  const double gap = trajectory_gap(hc, direct);
  MESSAGE("solver gap at n=64, nt=512: ", gap);
  CHECK(gap <= 1e-4);

  ProblemSpec fine = baseline_problem(128, 1024);
  SourceAssembly src_f = first_sweep_source(fine);
  const double gap_f =
      trajectory_gap(hopf_cole_solve(fine, src_f), hjb_direct_solve(fine, src_f));
  MESSAGE("solver gap at n=128, nt=1024: ", gap_f);
  CHECK(gap_f <= gap / 2.0 * 1.3);
  CHECK(gap_f >= gap / 2.0 * 0.7);
}

TEST_CASE("terminal snapshot is the terminal datum verbatim") {
  ProblemSpec spec = baseline_problem(64, 64);
  SourceAssembly src = first_sweep_source(spec);
  ValueTrajectory hc = hopf_cole_solve(spec, src);
  for (std::size_t i = 0; i < spec.phiT.size(); ++i)
    CHECK(hc.at(spec.mesh.nt).values[i] == spec.phiT.values[i]);
}

TEST_CASE("the lipschitz profile ends at the terminal gradient norm") {
  ProblemSpec spec = baseline_problem(64, 64);
  ValueTrajectory hc = hopf_cole_solve(spec, first_sweep_source(spec));
  auto profile = lipschitz_profile(hc);
  CHECK(profile.back() == doctest::Approx(0.5).epsilon(1e-6));
  for (double v : profile) CHECK(v < 1.0);  // comfortably under the budget
}

TEST_CASE("an overwhelming reaction term is reported instead of producing nans") {
  ProblemSpec spec = constant_coupling_problem(2e7, 32, 8);
  CHECK_THROWS_AS((void)hopf_cole_solve(spec, first_sweep_source(spec)),
                  std::runtime_error);
}

TEST_CASE("source assembly rejects mismatched meshes") {
  ProblemSpec spec = baseline_problem(64, 64);
  ValueTrajectory phi = ValueTrajectory::constant_in_time(spec.mesh, spec.phiT);
  DensityTrajectory rho = fp_solve(spec, phi);
  ValueTrajectory wrong =
      ValueTrajectory::constant_in_time(TimeMesh(0.5, 32), spec.phiT);
  CHECK_THROWS(assemble_source(spec, rho, wrong));
}
