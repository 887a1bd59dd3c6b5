#pragma once

#include <cmath>

#include "mfoc/fokker_planck.hpp"
#include "mfoc/hjb.hpp"

namespace mfoc {

/// A priori envelope A e^{B(T-t)} for the spatial Lipschitz constant of the
/// value function, with constants computed from the problem norms. The
/// unresolved additive slack in A is exposed as c0 (default 0) rather than
/// guessed.
struct LipschitzBudget {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;  // sup of the envelope, A e^{BT}
  double c0 = 0.0;
  double T = 0.0;

  double envelope(double t) const { return A * std::exp(B * (T - t)); }
};

LipschitzBudget compute_budget(const ProblemSpec& spec, double c0 = 0.0);

struct IterationRecord {
  int k = 0;
  double residual = 0.0;     // sup gap of Phi plus sup-over-t gap of grad Phi
  double density_gap = 0.0;  // L^inf(0,T; L^2) gap of successive densities
  double envelope_margin = 0.0;  // min over t of (envelope + slack - profile)
  bool budget_violation = false;
};

struct IterationLog {
  std::vector<IterationRecord> rows;
};

/// Converged (or last) iterate of the outer map, with the control F = -grad Phi
/// recoverable from Phi.
struct SolutionPair {
  ValueTrajectory Phi;
  DensityTrajectory rho;
  bool converged = false;
  double final_residual = 0.0;
  int iterations = 0;
};

/// One application of the outer map: phi -> rho (forward) -> Phi (backward).
struct OuterMapResult {
  ValueTrajectory Phi;
  DensityTrajectory rho;
};
OuterMapResult apply_F(const ProblemSpec& spec, const ValueTrajectory& phi);

struct SolveResult {
  SolutionPair pair;
  IterationLog log;
};

/// Damped Picard iteration phi_{k+1} = (1-theta) phi_k + theta F(phi_k),
/// started from the constant-in-time extension of the terminal datum.
/// Non-convergence is reported in the result, not thrown.
SolveResult solve(const ProblemSpec& spec, double theta, double tol, int max_iter);

struct CertificationItem {
  std::string name;
  bool pass = false;
  double margin = 0.0;
  std::string detail;
};

struct CertificationReport {
  std::vector<CertificationItem> items;
  bool all_pass() const {
    for (const auto& i : items)
      if (!i.pass) return false;
    return true;
  }
};

/// Post-solve certification: Lipschitz envelope, sup-norm budget,
/// self-consistency of the pair, and the forward-solver invariants on rho.
CertificationReport certify(const ProblemSpec& spec, const SolutionPair& pair,
                            const LipschitzBudget& budget, double tol);

}  // namespace mfoc
