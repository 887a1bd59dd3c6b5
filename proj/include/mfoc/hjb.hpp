#pragma once

#include "mfoc/problem.hpp"
#include "mfoc/trajectory.hpp"

namespace mfoc {

/// Per-time-node data entering the backward value equation: the scalar source
/// f = U(x, rho) - grad W * (rho grad phi_prev) and the nonlocal drift
/// b = grad W * rho.
struct SourceAssembly {
  TimeMesh mesh;
  std::vector<ScalarField> f;
  std::vector<VectorField> b;
  double f_sup = 0.0;
  double b_sup = 0.0;
};

/// Builds the source from a density trajectory and the previous outer value
/// iterate (frozen within one outer iteration).
SourceAssembly assemble_source(const ProblemSpec& spec, const DensityTrajectory& rho,
                               const ValueTrajectory& phi_prev);

/// Production backward solver. The substitution Phi = -2 ln v turns the
/// quadratic-Hamiltonian equation into the linear equation
/// v_t + Lap v - b.grad v - (f/2) v = 0, marched in reversed time with exact
/// spectral diffusion, upwind advection and exponential reaction. v stays
/// strictly positive; a non-positive v aborts with a refinement hint.
ValueTrajectory hopf_cole_solve(const ProblemSpec& spec, const SourceAssembly& src);

/// Independent cross-validation oracle: backward IMEX march on the primitive
/// form with a per-axis Godunov discretization of |grad Phi|^2/2 + b.grad Phi.
/// First-order accurate.
ValueTrajectory hjb_direct_solve(const ProblemSpec& spec, const SourceAssembly& src);

/// Nodal max of |grad Phi| per time node (spectral gradient).
std::vector<double> lipschitz_profile(const ValueTrajectory& Phi);

}  // namespace mfoc
