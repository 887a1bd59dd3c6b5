#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfoc/grid.hpp"

namespace mfoc {

/// One cosine mode amp * cos(2 pi k.x + phase) of a trigonometric potential.
struct TrigMode {
  std::array<int, 3> k{0, 0, 0};
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Interaction potential descriptor. Radial kinds (morse, power_law) are
/// sampled at the torus distance and smoothed with a Gaussian of width
/// eps_per near the cube faces; eps_per < 0 selects the default 2h.
struct Potential {
  enum class Kind { morse, power_law, trigonometric, tabulated, zero };
  Kind kind = Kind::zero;

  // morse: w(r) = -CA exp(-r/lA) + CR exp(-r/lR)
  double CA = 0.0, lA = 1.0, CR = 0.0, lR = 1.0;
  // power_law: w(r) = r^a/a - r^b/b, a >= 2, b >= 2
  double a = 2.0, b = 2.0;
  std::vector<TrigMode> modes;
  std::optional<ScalarField> table;
  double eps_per = -1.0;

  static Potential zero_potential() { return Potential{}; }
  static Potential trigonometric(std::vector<TrigMode> m) {
    Potential p;
    p.kind = Kind::trigonometric;
    p.modes = std::move(m);
    return p;
  }
};

/// Nodal samples of W and its gradient plus the norm estimates the Lipschitz
/// budget needs.
struct SampledPotential {
  ScalarField W;
  VectorField gradW;
  double grad_sup = 0.0;        // sup |grad W|
  double hessian_sup = 0.0;     // nodal max Frobenius norm of the Hessian
  double w_sup = 0.0;
  double w_l2 = 0.0;
  /// Max centered second difference of W (units of W); flags seam jumps.
  double discontinuity_indicator = 0.0;
  /// Set when the declared potential family violates the standing regularity
  /// hypotheses (e.g. power-law exponent below 2); validation fails on it.
  bool hypothesis_violation = false;
  std::vector<std::string> warnings;
};

SampledPotential sample_potential(const Potential& p, const TorusGrid& g);

/// Local running-cost density l(x, r) = V(x) + c * r^p with analytic
/// dl/dr = c p r^(p-1).
struct LocalRunningCost {
  std::optional<ScalarField> V;
  double c = 0.0;
  double p = 1.0;
  bool has_derivative = true;
};

/// U(x, m) = l(x, m(x)) + dl/dr(x, m(x)) * m(x).
ScalarField derive_U_from_L(const LocalRunningCost& L, const ScalarField& m);

/// Cost coupling U(x, m), prepared on a fixed grid.
class Coupling {
 public:
  enum class Kind { constant, additive_nonlocal, local_power };

  static Coupling constant(double c);
  /// U = V + K * m (periodic convolution with the sampled kernel K).
  static Coupling additive_nonlocal(ScalarField V, const Potential& K, const TorusGrid& g);
  /// U = c1 * min(m, m_sat)^p; the saturation cap keeps U uniformly bounded.
  static Coupling local_power(double c1, double p, double m_sat);

  ScalarField evaluate(const ScalarField& m) const;
  /// Running-cost density L with U = d/drho of \int L rho (the variational
  /// pairing that makes the control system the stationarity condition of the
  /// cost functional).
  ScalarField running_cost(const ScalarField& m) const;

  Kind kind() const { return kind_; }
  double sup_bound() const { return sup_bound_; }
  double grad_sup_bound() const { return grad_sup_bound_; }
  double c2_bound() const { return c2_bound_; }
  /// Lipschitz constant w.r.t. the L2 norm of m (grid-level for local_power).
  double lipschitz_l2(const TorusGrid& g) const;

 private:
  Kind kind_ = Kind::constant;
  double c_ = 0.0;
  ScalarField V_;
  ScalarField K_;        // sampled kernel
  ScalarField K_half_;   // K/2, cached for running_cost
  double c1_ = 0.0, p_ = 1.0, m_sat_ = 1.0;
  double sup_bound_ = 0.0, grad_sup_bound_ = 0.0, c2_bound_ = 0.0;
  double k_l2_ = 0.0;
};

/// Full problem data: grid, time mesh, potential, coupling and boundary data.
struct ProblemSpec {
  TorusGrid grid;
  TimeMesh mesh;
  Potential potential;
  SampledPotential sampled;
  Coupling coupling = Coupling::constant(0.0);
  ScalarField rho0;
  ScalarField phiT;
  double cfl_safety = 0.9;
};

ProblemSpec make_problem(const TorusGrid& grid, const TimeMesh& mesh,
                         const Potential& potential, Coupling coupling,
                         ScalarField rho0, ScalarField phiT,
                         double cfl_safety = 0.9);

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  std::vector<std::string> warnings;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

/// Checks the standing hypotheses of the model: potential regularity,
/// coupling boundedness/continuity (probed on random field pairs), and the
/// initial/terminal data. Failures are report entries, not exceptions.
AssumptionReport validate_assumptions(const ProblemSpec& spec);

}  // namespace mfoc
