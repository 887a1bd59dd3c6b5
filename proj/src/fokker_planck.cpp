#include "mfoc/fokker_planck.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mfoc {

namespace {

constexpr int kMaxSubsteps = 4096;

/// Conservative unsplit upwind update for rho_t = div(b rho), i.e. transport
/// with velocity u = -b in flux form. Face velocities are arithmetic means of
/// the nodal values; the flux differences telescope, so mass is exact.
ScalarField upwind_divergence_step(const ScalarField& rho, const VectorField& b,
                                   double dt) {
  const TorusGrid& g = rho.grid;
  ScalarField out = rho;
  const double lambda = dt / g.h;
  for (int axis = 0; axis < g.d; ++axis) {
    const auto& ba = b.comp[axis].values;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      auto idx = g.unravel(i);
      auto ip = idx, im = idx;
      ip[axis] = (idx[axis] + 1) % g.n;
      im[axis] = (idx[axis] + g.n - 1) % g.n;
      const std::size_t jp = g.ravel(ip), jm = g.ravel(im);
      const double u_plus = -0.5 * (ba[i] + ba[jp]);   // face i+1/2
      const double u_minus = -0.5 * (ba[jm] + ba[i]);  // face i-1/2
      const double flux_plus =
          std::max(u_plus, 0.0) * rho.values[i] + std::min(u_plus, 0.0) * rho.values[jp];
      const double flux_minus =
          std::max(u_minus, 0.0) * rho.values[jm] + std::min(u_minus, 0.0) * rho.values[i];
      out.values[i] -= lambda * (flux_plus - flux_minus);
    }
  }
  return out;
}

double admissible_dt(const TorusGrid& g, double b_sup) {
  const double denom = std::sqrt(static_cast<double>(g.d)) * b_sup;
  return denom > 0.0 ? g.h / denom : std::numeric_limits<double>::infinity();
}

DensityStepDiagnostics make_diag(double t, const ScalarField& rho, double b_sup) {
  DensityStepDiagnostics d;
  d.t = t;
  d.mass = integrate(rho);
  d.min_value = min_value(rho);
  d.l2 = l2_norm(rho);
  d.drift_sup = b_sup;
  return d;
}

}  // namespace

ScalarField fp_step(const ScalarField& rho, const DriftSnapshot& drift, double dt) {
  require_finite(rho, "fp_step");
  require_same_grid(rho.grid, drift.b.grid, "fp_step");
  const double dt_max = admissible_dt(rho.grid, drift.b_sup);
  if (dt > dt_max) {
    std::ostringstream os;
    os << "fp_step: CFL violation, dt=" << dt << " exceeds admissible dt=" << dt_max;
    throw CflError(os.str(), dt_max);
  }
  ScalarField advected = upwind_divergence_step(rho, drift.b, dt);
  return heat_semigroup(advected, dt);
}

DensityTrajectory fp_march(const ProblemSpec& spec, const DriftProvider& drift) {
  DensityTrajectory traj;
  traj.mesh = spec.mesh;
  traj.snaps.reserve(spec.mesh.nt + 1);
  traj.snaps.push_back(spec.rho0);
  traj.diag.push_back(make_diag(0.0, spec.rho0, 0.0));

  for (int k = 0; k < spec.mesh.nt; ++k) {
    VectorField b = drift(k, traj.snaps.back());
    DriftSnapshot snap(std::move(b));
    const double dt_adm = spec.cfl_safety * admissible_dt(spec.grid, snap.b_sup);
    int substeps = 1;
    if (spec.mesh.dt > dt_adm)
      substeps = static_cast<int>(std::ceil(spec.mesh.dt / dt_adm));
    if (substeps > kMaxSubsteps) {
      std::ostringstream os;
      os << "fp_march: step " << k << " needs " << substeps
         << " CFL sub-steps (sup|b|=" << snap.b_sup << ", dt floor reached)";
      throw std::runtime_error(os.str());
    }
    ScalarField rho = traj.snaps.back();
    const double sub_dt = spec.mesh.dt / substeps;
    for (int s = 0; s < substeps; ++s) {
      rho = upwind_divergence_step(rho, snap.b, sub_dt);
      rho = heat_semigroup(rho, sub_dt);
    }
    traj.diag.push_back(make_diag(spec.mesh.time(k + 1), rho, snap.b_sup));
    traj.snaps.push_back(std::move(rho));
  }
  return traj;
}

DensityTrajectory fp_solve(const ProblemSpec& spec, const ValueTrajectory& phi) {
  if (phi.mesh != spec.mesh)
    throw std::invalid_argument("fp_solve: value trajectory mesh mismatch");
  auto grads = trajectory_gradients(phi);
  return fp_march(spec, [&](int k, const ScalarField& rho_k) {
    VectorField b(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a) {
      b.comp[a] = convolve(spec.sampled.gradW.comp[a], rho_k);
      axpy(1.0, grads[k].comp[a], b.comp[a]);
    }
    return b;
  });
}

DensityTrajectory t_map(const ProblemSpec& spec, const ValueTrajectory& phi,
                        const DensityTrajectory& rho_frozen) {
  if (phi.mesh != spec.mesh || rho_frozen.mesh != spec.mesh)
    throw std::invalid_argument("t_map: trajectory mesh mismatch");
  auto grads = trajectory_gradients(phi);
  return fp_march(spec, [&](int k, const ScalarField&) {
    VectorField b(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a) {
      b.comp[a] = convolve(spec.sampled.gradW.comp[a], rho_frozen.at(k));
      axpy(1.0, grads[k].comp[a], b.comp[a]);
    }
    return b;
  });
}

DensityTrajectory fp_solve_with_control(
    const ProblemSpec& spec, const std::function<VectorField(int)>& control) {
  return fp_march(spec, [&](int k, const ScalarField& rho_k) {
    VectorField f = control(k);
    require_same_grid(f.grid, spec.grid, "fp_solve_with_control");
    VectorField b(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a) {
      b.comp[a] = convolve(spec.sampled.gradW.comp[a], rho_k);
      axpy(1.0, f.comp[a], b.comp[a]);
    }
    return b;
  });
}

double l2_growth_margin(const DensityTrajectory& traj) {
  const double cg = traj.max_drift_sup() * traj.max_drift_sup();
  const double base = traj.diag.front().l2 * traj.diag.front().l2;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& d : traj.diag) {
    const double bound = std::exp(cg * d.t) * base;
    worst = std::min(worst, bound - d.l2 * d.l2);
  }
  return worst;
}

std::vector<VectorField> trajectory_gradients(const ValueTrajectory& v) {
  std::vector<VectorField> out;
  out.reserve(v.snaps.size());
  for (const auto& s : v.snaps) out.push_back(gradient(s));
  return out;
}

double sup_gap(const ValueTrajectory& a, const ValueTrajectory& b) {
  if (a.mesh != b.mesh)
    throw std::invalid_argument("sup_gap: trajectory mesh mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.snaps.size(); ++k)
    m = std::max(m, sup_norm(a.snaps[k] - b.snaps[k]));
  return m;
}

}  // namespace mfoc
