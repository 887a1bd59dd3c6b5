#include "mfoc/hjb.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mfoc/fokker_planck.hpp"

namespace mfoc {

namespace {

/// Non-conservative upwind step of v_s + b.grad v = 0 (reversed-time
/// advection inside the transformed solver). Monotone under
/// dt * sqrt(d) * sup|b| / h <= 1.
ScalarField upwind_advect(const ScalarField& v, const VectorField& b, double dt) {
  const TorusGrid& g = v.grid;
  ScalarField out = v;
  const double lambda = dt / g.h;
  for (int axis = 0; axis < g.d; ++axis) {
    const auto& ba = b.comp[axis].values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto idx = g.unravel(i);
      auto ip = idx, im = idx;
      ip[axis] = (idx[axis] + 1) % g.n;
      im[axis] = (idx[axis] + g.n - 1) % g.n;
      const double vi = v.values[i];
      const double dm = vi - v.values[g.ravel(im)];
      const double dp = v.values[g.ravel(ip)] - vi;
      out.values[i] -=
          lambda * (std::max(ba[i], 0.0) * dm + std::min(ba[i], 0.0) * dp);
    }
  }
  return out;
}

/// Godunov flux for the convex 1D Hamiltonian h(p) = p^2/2 + b p.
double godunov_flux(double p_minus, double p_plus, double b) {
  const auto h = [b](double p) { return 0.5 * p * p + b * p; };
  const double p_star = -b;
  return std::max(h(std::max(p_minus, p_star)), h(std::min(p_plus, p_star)));
}

int substep_count(double dt, double dt_admissible) {
  if (dt <= dt_admissible) return 1;
  return static_cast<int>(std::ceil(dt / dt_admissible));
}

}  // namespace

SourceAssembly assemble_source(const ProblemSpec& spec, const DensityTrajectory& rho,
                               const ValueTrajectory& phi_prev) {
  if (rho.mesh != spec.mesh || phi_prev.mesh != spec.mesh)
    throw std::invalid_argument("assemble_source: trajectory mesh mismatch");
  SourceAssembly src;
  src.mesh = spec.mesh;
  src.f.reserve(spec.mesh.nt + 1);
  src.b.reserve(spec.mesh.nt + 1);
  for (int k = 0; k <= spec.mesh.nt; ++k) {
    const ScalarField& rho_k = rho.at(k);
    VectorField grad_phi = gradient(phi_prev.at(k));
    ScalarField f_k = spec.coupling.evaluate(rho_k);
    for (int a = 0; a < spec.grid.d; ++a) {
      ScalarField weighted = rho_k;
      for (std::size_t i = 0; i < weighted.size(); ++i)
        weighted.values[i] *= grad_phi.comp[a].values[i];
      axpy(-1.0, convolve(spec.sampled.gradW.comp[a], weighted), f_k);
    }
    VectorField b_k(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a)
      b_k.comp[a] = convolve(spec.sampled.gradW.comp[a], rho_k);
    src.f_sup = std::max(src.f_sup, sup_norm(f_k));
    src.b_sup = std::max(src.b_sup, sup_norm(b_k));
    src.f.push_back(std::move(f_k));
    src.b.push_back(std::move(b_k));
  }
  return src;
}

ValueTrajectory hopf_cole_solve(const ProblemSpec& spec, const SourceAssembly& src) {
  if (src.mesh != spec.mesh)
    throw std::invalid_argument("hopf_cole_solve: source mesh mismatch");
  const int nt = spec.mesh.nt;
  const double dt = spec.mesh.dt;
  const double sqrt_d = std::sqrt(static_cast<double>(spec.grid.d));

  ValueTrajectory Phi;
  Phi.mesh = spec.mesh;
  Phi.snaps.assign(static_cast<std::size_t>(nt) + 1, ScalarField(spec.grid));
  Phi.snaps[nt] = spec.phiT;  // terminal datum, copied exactly

  ScalarField v = spec.phiT;
  for (double& x : v.values) x = std::exp(-0.5 * x);

  for (int j = 0; j < nt; ++j) {
    const int k = nt - j;  // known-time node for this backward step
    const VectorField& b = src.b[k];
    const ScalarField& f = src.f[k];
    const double b_sup = sup_norm(b);
    const double dt_adm =
        b_sup > 0.0 ? spec.cfl_safety * spec.grid.h / (sqrt_d * b_sup)
                    : std::numeric_limits<double>::infinity();
    const int m = substep_count(dt, dt_adm);
    const double sub_dt = dt / m;
    for (int s = 0; s < m; ++s) {
      v = upwind_advect(v, b, sub_dt);
      for (std::size_t i = 0; i < v.size(); ++i)
        v.values[i] *= std::exp(-0.5 * sub_dt * f.values[i]);
      v = heat_semigroup(v, sub_dt);
    }
    const double mn = min_value(v);
    if (!(mn > 0.0)) {
      std::ostringstream os;
      os << "hopf_cole_solve: transformed variable reached " << mn << " at step "
         << j << "; refine dt (the continuous variable is strictly positive)";
      throw std::runtime_error(os.str());
    }
    ScalarField& out = Phi.snaps[k - 1];
    for (std::size_t i = 0; i < v.size(); ++i)
      out.values[i] = -2.0 * std::log(v.values[i]);
  }
  return Phi;
}

ValueTrajectory hjb_direct_solve(const ProblemSpec& spec, const SourceAssembly& src) {
  if (src.mesh != spec.mesh)
    throw std::invalid_argument("hjb_direct_solve: source mesh mismatch");
  const TorusGrid& g = spec.grid;
  const int nt = spec.mesh.nt;
  const double dt = spec.mesh.dt;
  const double sqrt_d = std::sqrt(static_cast<double>(g.d));

  ValueTrajectory Phi;
  Phi.mesh = spec.mesh;
  Phi.snaps.assign(static_cast<std::size_t>(nt) + 1, ScalarField(g));
  Phi.snaps[nt] = spec.phiT;

  ScalarField cur = spec.phiT;
  for (int j = 0; j < nt; ++j) {
    const int k = nt - j;
    const VectorField& b = src.b[k];
    const ScalarField& f = src.f[k];
    const double b_sup = sup_norm(b);

    // One-sided slope bound for the CFL speed estimate.
    double p_sup = 0.0;
    for (int axis = 0; axis < g.d; ++axis)
      for (std::size_t i = 0; i < cur.size(); ++i) {
        auto idx = g.unravel(i);
        auto ip = idx;
        ip[axis] = (idx[axis] + 1) % g.n;
        p_sup = std::max(p_sup,
                         std::abs(cur.values[g.ravel(ip)] - cur.values[i]) / g.h);
      }
    const double speed = sqrt_d * (p_sup + b_sup);
    const double dt_adm = speed > 0.0 ? spec.cfl_safety * g.h / speed
                                      : std::numeric_limits<double>::infinity();
    const int m = substep_count(dt, dt_adm);
    const double sub_dt = dt / m;

    for (int s = 0; s < m; ++s) {
      ScalarField next = cur;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        auto idx = g.unravel(i);
        double ham = 0.0;
        for (int axis = 0; axis < g.d; ++axis) {
          auto ip = idx, im = idx;
          ip[axis] = (idx[axis] + 1) % g.n;
          im[axis] = (idx[axis] + g.n - 1) % g.n;
          const double p_minus = (cur.values[i] - cur.values[g.ravel(im)]) / g.h;
          const double p_plus = (cur.values[g.ravel(ip)] - cur.values[i]) / g.h;
          ham += godunov_flux(p_minus, p_plus, b.comp[axis].values[i]);
        }
        next.values[i] += sub_dt * (f.values[i] - ham);
      }
      cur = heat_semigroup(next, sub_dt);
    }
    Phi.snaps[k - 1] = cur;
  }
  return Phi;
}

std::vector<double> lipschitz_profile(const ValueTrajectory& Phi) {
  std::vector<double> out;
  out.reserve(Phi.snaps.size());
  for (const auto& s : Phi.snaps) out.push_back(sup_norm(gradient(s)));
  return out;
}

}  // namespace mfoc
