#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mfoc/runner.hpp"

using namespace mfoc;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "problem": {
    "grid": {"d": 1, "n": 64},
    "mesh": {"T": 0.5, "nt": 64},
    "potential": {"kind": "trigonometric",
                  "modes": [{"k": [1], "amplitude": -0.02533029591058444}]},
    "coupling": {"kind": "additive_nonlocal",
                 "V": {"modes": [{"k": [1], "amplitude": 0.5}]},
                 "kernel": "potential"},
    "rho0": {"constant": 1.0, "modes": [{"k": [1], "amplitude": 0.5}]},
    "phi_T": {"modes": [{"k": [1], "amplitude": 0.07957747154594767}]}
  },
  "solver": {"theta": 0.5, "tol": 1e-6, "max_iter": 200},
  "particles": {"N": 200, "seeds": [1]},
  "output": {"directory": "%OUT%", "snapshot_stride": 16}
})";

std::string write_config(const std::string& name, std::string text,
                         const std::string& out_dir) {
  auto pos = text.find("%OUT%");
  if (pos != std::string::npos) text.replace(pos, 5, out_dir);
  fs::path dir = fs::temp_directory_path() / "mfoc_runner_tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scratch(const std::string& leaf) {
  return (fs::temp_directory_path() / "mfoc_runner_tests" / leaf).string();
}

}  // namespace

TEST_CASE("a well-formed configuration parses into a consistent problem") {
  std::string p = write_config("ok.json", kSmallConfig, scratch("ok_out"));
  RunConfig cfg = load_config(p);
  CHECK(cfg.problem.grid.n == 64);
  CHECK(cfg.problem.mesh.nt == 64);
  CHECK(cfg.solver.theta == 0.5);
  CHECK(cfg.particles.N == 200);
  CHECK(cfg.warnings.empty());
  CHECK(std::abs(integrate(cfg.problem.rho0) - 1.0) < 1e-13);
}

TEST_CASE("unknown keys are rejected loudly") {
  std::string text = kSmallConfig;
  auto pos = text.find("\"theta\"");
  text.replace(pos, 7, "\"thetaa\"");
  std::string p = write_config("typo.json", text, scratch("typo_out"));
  CHECK_THROWS_AS(load_config(p), ConfigError);
}

TEST_CASE("initial mass is renormalized within tolerance and rejected beyond") {
  std::string near = kSmallConfig;
  near.replace(near.find("\"constant\": 1.0"), 15, "\"constant\": 1.005");
  RunConfig cfg = load_config(write_config("near.json", near, scratch("near_out")));
  CHECK_FALSE(cfg.warnings.empty());
  CHECK(std::abs(integrate(cfg.problem.rho0) - 1.0) < 1e-13);

  std::string far = kSmallConfig;
  far.replace(far.find("\"constant\": 1.0"), 15, "\"constant\": 1.2");
  CHECK_THROWS_AS(load_config(write_config("far.json", far, scratch("far_out"))),
                  ConfigError);
}

TEST_CASE("output root override re-roots the run directory") {
  OutputConfig out;
  out.directory = "runs/something";
  setenv("MFOC_OUTPUT_ROOT", "/tmp/mfoc_root", 1);
  CHECK(resolve_output_dir(out) == "/tmp/mfoc_root/something");
  unsetenv("MFOC_OUTPUT_ROOT");
  CHECK(resolve_output_dir(out) == "runs/something");
}

TEST_CASE("trajectory containers roundtrip bitwise") {
  RunConfig cfg =
      load_config(write_config("ok.json", kSmallConfig, scratch("ok_out")));
  SolveResult res = solve(cfg.problem, 0.5, 1e-4, 50);
  std::string p = scratch("traj.bin");
  save_trajectory(p, res.pair.Phi);
  ValueTrajectory back = load_value_trajectory(p);
  REQUIRE(back.mesh == res.pair.Phi.mesh);
  for (std::size_t k = 0; k < back.snaps.size(); ++k)
    for (std::size_t i = 0; i < back.snaps[k].size(); ++i)
      CHECK(back.snaps[k].values[i] == res.pair.Phi.snaps[k].values[i]);

  save_trajectory(scratch("rho.bin"), res.pair.rho);
  DensityTrajectory rho = load_density_trajectory(scratch("rho.bin"));
  CHECK(rho.diag.size() == rho.snaps.size());
  CHECK(std::abs(rho.diag.back().mass - 1.0) < 1e-12);
}

TEST_CASE("the zero problem has zero cost") {
  TorusGrid g(1, 32);
  ProblemSpec spec = make_problem(g, TimeMesh(0.5, 32), Potential::zero_potential(),
                                  Coupling::constant(0.0), ScalarField(g, 1.0),
                                  ScalarField(g, 0.0));
  SolveResult res = solve(spec, 0.5, 1e-10, 20);
  REQUIRE(res.pair.converged);
  CostReport cost = evaluate_cost(spec, res.pair);
  CHECK(std::abs(cost.total) < 1e-13);
}

TEST_CASE("a uniform running cost integrates to c T plus the terminal integral") {
  const double c = 0.7, gamma = 0.3;
  TorusGrid g(1, 32);
  ProblemSpec spec = make_problem(g, TimeMesh(0.5, 32), Potential::zero_potential(),
                                  Coupling::constant(c), ScalarField(g, 1.0),
                                  ScalarField(g, gamma));
  SolveResult res = solve(spec, 0.5, 1e-10, 20);
  REQUIRE(res.pair.converged);
  CostReport cost = evaluate_cost(spec, res.pair);
  CHECK(cost.running == doctest::Approx(c * 0.5).epsilon(1e-10));
  CHECK(cost.terminal == doctest::Approx(gamma).epsilon(1e-10));
  CHECK(cost.total == cost.running + cost.terminal);  // exact as stored
}

TEST_CASE("perturbing the zero problem never lowers the cost") {
  TorusGrid g(1, 32);
  ProblemSpec spec = make_problem(g, TimeMesh(0.5, 32), Potential::zero_potential(),
                                  Coupling::constant(0.0), ScalarField(g, 1.0),
                                  ScalarField(g, 0.0));
  SolveResult res = solve(spec, 0.5, 1e-10, 20);
  REQUIRE(res.pair.converged);
  ProbeReport probe = optimality_probe(spec, res.pair, 5, 0.1, 99);
  CHECK(probe.base_cost == doctest::Approx(0.0));
  for (const auto& row : probe.rows) CHECK(row.delta_e >= -1e-10);
}

TEST_CASE("pipeline exit codes distinguish the failure classes") {
  CHECK(run("/nonexistent/config.json") == kExitConfig);

  std::string bad_pot = kSmallConfig;
  bad_pot.replace(bad_pot.find("{\"kind\": \"trigonometric\",\n                  "
                               "\"modes\": [{\"k\": [1], \"amplitude\": "
                               "-0.02533029591058444}]}"),
                  std::string("{\"kind\": \"trigonometric\",\n                  "
                              "\"modes\": [{\"k\": [1], \"amplitude\": "
                              "-0.02533029591058444}]}")
                      .size(),
                  "{\"kind\": \"power_law\", \"a\": 1.5, \"b\": 3.0}");
  CHECK(run(write_config("bad_pot.json", bad_pot, scratch("bad_pot_out"))) ==
        kExitAssumptions);

  std::string stuck = kSmallConfig;
  stuck.replace(stuck.find("\"tol\": 1e-6, \"max_iter\": 200"),
                std::string("\"tol\": 1e-6, \"max_iter\": 200").size(),
                "\"tol\": 1e-15, \"max_iter\": 2");
  CHECK(run(write_config("stuck.json", stuck, scratch("stuck_out"))) == kExitSolver);
  CHECK(fs::exists(fs::path(scratch("stuck_out")) / "manifest.json"));
  CHECK(slurp(fs::path(scratch("stuck_out")) / "manifest.json").find("not_converged") !=
        std::string::npos);

  CHECK(run(write_config("ok.json", kSmallConfig, scratch("ok_out"))) == kExitOk);
  for (const char* f : {"manifest.json", "assumptions.json", "certification.json",
                        "cost.json", "iterations.csv", "density_diagnostics.csv",
                        "phi_trajectory.bin", "rho_trajectory.bin", "rho_final.csv"})
    CHECK(fs::exists(fs::path(scratch("ok_out")) / f));
}

TEST_CASE("identical configurations produce identical artifacts") {
  std::string a = write_config("det_a.json", kSmallConfig, scratch("det_a"));
  std::string b = write_config("det_b.json", kSmallConfig, scratch("det_b"));
  REQUIRE(run(a) == kExitOk);
  REQUIRE(run(b) == kExitOk);
  CHECK(slurp(fs::path(scratch("det_a")) / "rho_trajectory.bin") ==
        slurp(fs::path(scratch("det_b")) / "rho_trajectory.bin"));
  CHECK(slurp(fs::path(scratch("det_a")) / "phi_trajectory.bin") ==
        slurp(fs::path(scratch("det_b")) / "phi_trajectory.bin"));
  // manifests agree except for the timestamp line
  std::istringstream ma(slurp(fs::path(scratch("det_a")) / "manifest.json"));
  std::istringstream mb(slurp(fs::path(scratch("det_b")) / "manifest.json"));
  std::string la, lb;
  while (std::getline(ma, la) && std::getline(mb, lb)) {
    if (la.find("timestamp") != std::string::npos) continue;
    CHECK(la == lb);
  }
}

TEST_CASE("particle and probe commands consume a stored run") {
  std::string cfgp = write_config("ok.json", kSmallConfig, scratch("ok_out"));
  REQUIRE(run(cfgp) == kExitOk);
  CHECK(run_particles(cfgp, scratch("ok_out")) == kExitOk);
  CHECK(fs::exists(fs::path(scratch("ok_out")) / "particles" / "particle_report.json"));
  CHECK(run_probe(cfgp, scratch("ok_out")) == kExitOk);
  CHECK(fs::exists(fs::path(scratch("ok_out")) / "probe.json"));
}
