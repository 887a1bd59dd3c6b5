#pragma once

#include <functional>

#include "mfoc/problem.hpp"
#include "mfoc/trajectory.hpp"

namespace mfoc {

/// Drift b = grad W * rho + grad phi at one time node.
struct DriftSnapshot {
  VectorField b;
  double b_sup = 0.0;

  explicit DriftSnapshot(VectorField field) : b(std::move(field)) {
    b_sup = sup_norm(b);
  }
};

/// Advection step violates the stability bound; carries the largest stable dt.
class CflError : public std::runtime_error {
 public:
  CflError(const std::string& msg, double admissible)
      : std::runtime_error(msg), admissible_dt(admissible) {}
  double admissible_dt;
};

/// One IMEX step of rho_t = div(b rho) + Lap rho: conservative first-order
/// upwind for the transport part, exact spectral heat semigroup for the
/// diffusion. Both sub-steps conserve mass exactly and preserve positivity
/// under the CFL bound dt * sqrt(d) * sup|b| / h <= 1.
ScalarField fp_step(const ScalarField& rho, const DriftSnapshot& drift, double dt);

/// Supplies the drift for step k given the current density.
using DriftProvider = std::function<VectorField(int k, const ScalarField& rho_k)>;

/// March the density over the whole mesh with per-step CFL sub-stepping
/// (the drift is frozen within one mesh step). Throws when the sub-step
/// count explodes.
DensityTrajectory fp_march(const ProblemSpec& spec, const DriftProvider& drift);

/// Forward solve with drift grad W * rho (time-lagged) + grad phi.
DensityTrajectory fp_solve(const ProblemSpec& spec, const ValueTrajectory& phi);

/// The frozen-drift map: same as fp_solve but the self-interaction term uses
/// the given density trajectory instead of the evolving one. Iterating this
/// map converges to the fp_solve output.
DensityTrajectory t_map(const ProblemSpec& spec, const ValueTrajectory& phi,
                        const DensityTrajectory& rho_frozen);

/// Forward solve under an explicit control: drift grad W * rho + F.
DensityTrajectory fp_solve_with_control(const ProblemSpec& spec,
                                        const std::function<VectorField(int)>& control);

/// Exponential L2 growth certificate: ||rho(t)||^2 <= exp(Cg t) ||rho0||^2
/// with Cg recomputed from the run's measured sup|b|. Returns the worst
/// margin (positive = satisfied).
double l2_growth_margin(const DensityTrajectory& traj);

}  // namespace mfoc
