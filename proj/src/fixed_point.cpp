#include "mfoc/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mfoc {

namespace {

double grad_sup_gap(const ValueTrajectory& a, const ValueTrajectory& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.snaps.size(); ++k)
    m = std::max(m, sup_norm(gradient(a.snaps[k] - b.snaps[k])));
  return m;
}

double density_linf_l2_gap(const DensityTrajectory& a, const DensityTrajectory& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.snaps.size(); ++k)
    m = std::max(m, l2_norm(a.snaps[k] - b.snaps[k]));
  return m;
}

/// Min over mesh times of envelope(t) + slack - ||grad Phi(., t)||_inf.
double envelope_margin(const ValueTrajectory& Phi, const LipschitzBudget& budget,
                       double slack) {
  auto profile = lipschitz_profile(Phi);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < profile.size(); ++k) {
    double t = Phi.mesh.time(static_cast<int>(k));
    m = std::min(m, budget.envelope(t) + slack - profile[k]);
  }
  return m;
}

}  // namespace

LipschitzBudget compute_budget(const ProblemSpec& spec, double c0) {
  LipschitzBudget budget;
  budget.T = spec.mesh.T;
  budget.c0 = c0;
  const double T = spec.mesh.T;
  const double hess_w = spec.sampled.hessian_sup;
  const double grad_w = spec.sampled.grad_sup;
  const double phiT_sup = sup_norm(spec.phiT);
  const double grad_phiT_sup = sup_norm(gradient(spec.phiT));
  const double u_sup = spec.coupling.sup_bound();
  const double grad_u_sup = spec.coupling.grad_sup_bound();
  if (!std::isfinite(hess_w) || !std::isfinite(grad_w))
    throw std::invalid_argument("compute_budget: potential norm estimates unavailable");

  budget.A = grad_phiT_sup + hess_w * (0.5 * T + 2.0 * phiT_sup + 2.0 * T * u_sup) +
             T * grad_u_sup + c0;
  budget.B = hess_w * (2.0 * grad_w + 1.0);
  budget.C = budget.A * std::exp(budget.B * T);
  return budget;
}

OuterMapResult apply_F(const ProblemSpec& spec, const ValueTrajectory& phi) {
  OuterMapResult out;
  out.rho = fp_solve(spec, phi);
  out.Phi = hopf_cole_solve(spec, assemble_source(spec, out.rho, phi));
  return out;
}

SolveResult solve(const ProblemSpec& spec, double theta, double tol, int max_iter) {
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("solve: damping must be in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");

  const LipschitzBudget budget = compute_budget(spec);
  const double slack = 10.0 * (spec.grid.h + spec.mesh.dt) * budget.C;

  SolveResult result;
  ValueTrajectory phi = ValueTrajectory::constant_in_time(spec.mesh, spec.phiT);
  ValueTrajectory prev_Phi;
  DensityTrajectory prev_rho;
  bool have_prev = false;

  for (int k = 1; k <= max_iter; ++k) {
    OuterMapResult step = apply_F(spec, phi);

    IterationRecord rec;
    rec.k = k;
    rec.envelope_margin = envelope_margin(step.Phi, budget, slack);
    rec.budget_violation = rec.envelope_margin < 0.0;
    if (have_prev) {
      rec.residual = sup_gap(step.Phi, prev_Phi) + grad_sup_gap(step.Phi, prev_Phi);
      rec.density_gap = density_linf_l2_gap(step.rho, prev_rho);
    } else {
      rec.residual = std::numeric_limits<double>::infinity();
      rec.density_gap = std::numeric_limits<double>::infinity();
    }
    result.log.rows.push_back(rec);

    prev_Phi = step.Phi;
    prev_rho = step.rho;
    have_prev = true;

    result.pair.iterations = k;
    result.pair.final_residual = rec.residual;
    if (have_prev && rec.residual <= tol) {
      result.pair.converged = true;
      result.pair.Phi = std::move(step.Phi);
      break;
    }

    // phi <- (1 - theta) phi + theta Phi
    for (std::size_t j = 0; j < phi.snaps.size(); ++j) {
      for (std::size_t i = 0; i < phi.snaps[j].size(); ++i)
        phi.snaps[j].values[i] = (1.0 - theta) * phi.snaps[j].values[i] +
                                 theta * step.Phi.snaps[j].values[i];
    }
    if (k == max_iter) result.pair.Phi = std::move(step.Phi);
  }

  // Density consistent with the final value trajectory.
  result.pair.rho = fp_solve(spec, result.pair.Phi);
  return result;
}

CertificationReport certify(const ProblemSpec& spec, const SolutionPair& pair,
                            const LipschitzBudget& budget, double tol) {
  CertificationReport report;
  const double slack = 10.0 * (spec.grid.h + spec.mesh.dt) * budget.C;

  {
    CertificationItem item;
    item.name = "lipschitz_envelope";
    item.margin = envelope_margin(pair.Phi, budget, slack);
    item.pass = item.margin >= 0.0;
    std::ostringstream os;
    os << "A=" << budget.A << " B=" << budget.B << " slack=" << slack
       << " (additive constant c0=" << budget.c0 << ")";
    item.detail = os.str();
    report.items.push_back(std::move(item));
  }

  {
    CertificationItem item;
    item.name = "sup_norm_budget";
    double phi_sup = 0.0;
    for (const auto& s : pair.Phi.snaps) phi_sup = std::max(phi_sup, sup_norm(s));
    item.margin = budget.C - phi_sup;
    item.pass = item.margin >= 0.0;
    std::ostringstream os;
    os << "sup|Phi|=" << phi_sup << " C=" << budget.C;
    item.detail = os.str();
    report.items.push_back(std::move(item));
  }

  {
    CertificationItem item;
    item.name = "self_consistency";
    DensityTrajectory replay = fp_solve(spec, pair.Phi);
    double gap = density_linf_l2_gap(replay, pair.rho);
    item.margin = 10.0 * tol - gap;
    item.pass = item.margin >= 0.0;
    std::ostringstream os;
    os << "replay_gap=" << gap;
    item.detail = os.str();
    report.items.push_back(std::move(item));
  }

  {
    CertificationItem item;
    item.name = "density_invariants";
    double worst_mass = 0.0, worst_min = 0.0;
    for (const auto& d : pair.rho.diag) {
      worst_mass = std::max(worst_mass, std::abs(d.mass - 1.0));
      worst_min = std::min(worst_min, d.min_value);
    }
    double growth = l2_growth_margin(pair.rho);
    item.pass = worst_mass <= 1e-12 && worst_min >= -1e-13 && growth >= 0.0;
    item.margin = growth;
    std::ostringstream os;
    os << "max|mass-1|=" << worst_mass << " min_rho=" << worst_min
       << " l2_growth_margin=" << growth;
    item.detail = os.str();
    report.items.push_back(std::move(item));
  }

  {
    // Informational: discrete 1/2-Hoelder quotient of Phi in time. The full
    // Hoelder budget has no closed-form constant, so this is reported, not
    // asserted.
    CertificationItem item;
    item.name = "time_hoelder_quotient_info";
    double q = 0.0;
    for (std::size_t k = 0; k + 1 < pair.Phi.snaps.size(); ++k)
      q = std::max(q, sup_norm(pair.Phi.snaps[k + 1] - pair.Phi.snaps[k]) /
                          std::sqrt(pair.Phi.mesh.dt));
    item.pass = true;
    item.margin = q;
    std::ostringstream os;
    os << "max_k |Phi_{k+1}-Phi_k|_inf / sqrt(dt) = " << q;
    item.detail = os.str();
    report.items.push_back(std::move(item));
  }

  return report;
}

}  // namespace mfoc
