#pragma once

#include <cstdint>
#include <functional>

#include "mfoc/fixed_point.hpp"
#include "mfoc/problem.hpp"
#include "mfoc/trajectory.hpp"

namespace mfoc {

/// Equal-weight particle positions on the torus, coordinates in [-1/2, 1/2).
struct ParticleCloud {
  int d = 1;
  std::vector<std::array<double, 3>> pos;
  std::uint64_t seed = 0;
  double t = 0.0;

  int size() const { return static_cast<int>(pos.size()); }
};

/// Called after every completed step with the time-node index and the cloud.
using StepObserver = std::function<void(int k, const ParticleCloud&)>;

/// Multilinear periodic interpolation of a nodal field.
double interpolate(const ScalarField& f, const std::array<double, 3>& x);

/// Draw N samples from a nonnegative unit-mass density: inverse CDF in d=1,
/// rejection sampling in d >= 2.
ParticleCloud sample_from_density(const ScalarField& rho, int N, std::uint64_t seed);

/// Euler-Maruyama simulation of the interacting particle system whose law
/// follows the forward density equation: drift -(grad W * mu_emp + grad Phi),
/// unit diffusion matrix sqrt(2) I. The empirical convolution is evaluated
/// pairwise for small N and by grid deposition for large N. Reproducible per
/// seed. Returns the final cloud.
ParticleCloud simulate_mkv(const ProblemSpec& spec, const ValueTrajectory& Phi, int N,
                           std::uint64_t seed, const StepObserver& observer = nullptr);

enum class AdjointMode { optimal, zero_velocity };

/// Flow started as a Dirac at x0 at time node k0, advanced to T with the
/// drift taken from the grid solution: -(grad W * rho + grad Phi) for the
/// optimal flow, -(grad W * rho) for the zero-velocity flow.
ParticleCloud simulate_adjoint(const ProblemSpec& spec, const DensityTrajectory& rho,
                               const ValueTrajectory& Phi, const std::array<double, 3>& x0,
                               int k0, AdjointMode mode, int N, std::uint64_t seed,
                               const StepObserver& observer = nullptr);

/// Wasserstein-1 distance with the torus ground metric. d=1 uses the exact
/// periodic formula (optimal rotation of the CDF difference); d >= 2 solves an
/// exact assignment on at most 512 equal-weight samples and is an estimate.
double wasserstein1(const ParticleCloud& a, const ParticleCloud& b);
double wasserstein1(const ScalarField& a, const ScalarField& b);
double wasserstein1(const ParticleCloud& a, const ScalarField& b);

/// Monte-Carlo reconstruction of Phi(x0, t0) from the zero-velocity flow,
/// term by term, plus the gradient-energy integral along the optimal flow.
/// Standard errors come from 16 independent batches.
struct ValueIdentityReport {
  std::array<double, 3> x0{0, 0, 0};
  double t0 = 0.0;
  // terms along the zero-velocity flow
  double terminal_term = 0.0;        // int phi_T zeta_T
  double gradient_term = 0.0;        // int int |grad Phi|^2/2 zeta
  double nonlocal_term = 0.0;        // int int (grad W * (rho grad phi)) zeta
  double coupling_term = 0.0;        // int int U zeta
  double estimate = 0.0;             // terminal - gradient - nonlocal + coupling
  double grid_value = 0.0;           // Phi(x0, t0) interpolated from the grid
  double residual = 0.0;
  double stderr_zeta = 0.0;
  // gradient energy along the optimal flow, with its a priori budget
  double gradient_energy_eta = 0.0;
  double stderr_eta = 0.0;
  double gradient_energy_budget = 0.0;
};

ValueIdentityReport verify_value_identity(const ProblemSpec& spec,
                                          const SolutionPair& pair,
                                          const ValueTrajectory& phi_prev,
                                          const std::array<double, 3>& x0, int k0,
                                          int N, std::uint64_t seed);

}  // namespace mfoc
