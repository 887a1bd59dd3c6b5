#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfoc/fixed_point.hpp"
#include "mfoc/problem.hpp"

namespace mfoc {

/// Configuration file is malformed or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double theta = 0.5;
  double tol = 1e-6;
  int max_iter = 200;
};

struct ParticlesConfig {
  int N = 10000;
  std::vector<std::uint64_t> seeds{1};
};

struct OutputConfig {
  std::string directory = "runs/out";
  int snapshot_stride = 64;
};

struct RunConfig {
  ProblemSpec problem;
  SolverConfig solver;
  ParticlesConfig particles;
  OutputConfig output;
  std::vector<std::string> warnings;  // e.g. rho0 renormalization
  std::string canonical;              // canonical serialization, hashed into the manifest
};

/// Parse and validate a run configuration. Unknown keys are rejected. The
/// initial density is renormalized to unit mass when the defect is small
/// (recorded as a warning) and rejected when it exceeds 1e-2.
RunConfig load_config(const std::string& path);

/// Resolve the output directory: if the output-root override environment
/// variable MFOC_OUTPUT_ROOT is set, the configured directory is re-rooted
/// under it (keeping only its last path component).
std::string resolve_output_dir(const OutputConfig& out);

/// Whole-trajectory container: a small header then every snapshot in node
/// order, same layout as the single-field format.
void save_trajectory(const std::string& path, const ValueTrajectory& v);
void save_trajectory(const std::string& path, const DensityTrajectory& v);
ValueTrajectory load_value_trajectory(const std::string& path);
DensityTrajectory load_density_trajectory(const std::string& path);

struct CostReport {
  double running = 0.0;   // int int [L + |F|^2/2] rho
  double terminal = 0.0;  // int phi_T rho(T)
  double total = 0.0;     // running + terminal, stored as the exact sum
  bool l_available = true;
};

/// Time-trapezoid, space-exact evaluation of the cost of the control
/// F = -grad Phi along the solved density.
CostReport evaluate_cost(const ProblemSpec& spec, const SolutionPair& pair);

struct PerturbationResult {
  int index = 0;
  double eps = 0.0;
  double delta_e = 0.0;
};

struct ProbeReport {
  double base_cost = 0.0;
  std::vector<PerturbationResult> rows;
  double min_delta_e = 0.0;
};

/// Re-solves the forward equation under F = F* + eps * dF for n_perturb random
/// smooth perturbations (three Fourier modes each, sup-normalized) and reports
/// the cost change per perturbation.
ProbeReport optimality_probe(const ProblemSpec& spec, const SolutionPair& pair,
                             int n_perturb, double eps, std::uint64_t seed);

// Exit codes of the pipeline stages.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAssumptions = 3;
inline constexpr int kExitSolver = 4;
inline constexpr int kExitCertification = 5;

/// Full pipeline: validate, budget, solve, certify, cost, persist. Diagnostics
/// are written even on failure paths.
int run(const std::string& config_path);

/// Assumption validation only; writes assumptions.json next to nothing.
int run_validate(const std::string& config_path);

/// Particle companion against a stored run directory: per-seed simulation,
/// mean-field distance at T, and the Monte-Carlo value reconstruction.
int run_particles(const std::string& config_path, const std::string& from_dir);

/// Variational probe of the stored control over a small range of step sizes.
int run_probe(const std::string& config_path, const std::string& from_dir);

}  // namespace mfoc
