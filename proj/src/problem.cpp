#include "mfoc/problem.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace mfoc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double torus_distance(const std::array<double, 3>& x, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += x[a] * x[a];
  return std::sqrt(s);
}

double morse_w(const Potential& p, double r) {
  return -p.CA * std::exp(-r / p.lA) + p.CR * std::exp(-r / p.lR);
}

double power_law_w(const Potential& p, double r) {
  return std::pow(r, p.a) / p.a - std::pow(r, p.b) / p.b;
}

/// Nodal max of the Frobenius norm of the spectral Hessian.
double spectral_hessian_sup(const ScalarField& W) {
  const TorusGrid& g = W.grid;
  VectorField gw = gradient(W);
  std::vector<double> frob2(g.size(), 0.0);
  for (int a = 0; a < g.d; ++a) {
    VectorField ga = gradient(gw.comp[a]);
    for (int b = 0; b < g.d; ++b)
      for (std::size_t i = 0; i < frob2.size(); ++i)
        frob2[i] += ga.comp[b].values[i] * ga.comp[b].values[i];
  }
  double m = 0.0;
  for (double v : frob2) m = std::max(m, v);
  return std::sqrt(m);
}

/// Max centered second difference along any axis, in units of W.
double second_difference_sup(const ScalarField& W) {
  const TorusGrid& g = W.grid;
  double m = 0.0;
  for (std::size_t i = 0; i < W.size(); ++i) {
    auto idx = g.unravel(i);
    for (int a = 0; a < g.d; ++a) {
      auto ip = idx, im = idx;
      ip[a] = (idx[a] + 1) % g.n;
      im[a] = (idx[a] + g.n - 1) % g.n;
      m = std::max(m, std::abs(W.values[g.ravel(ip)] - 2.0 * W.values[i] +
                               W.values[g.ravel(im)]));
    }
  }
  return m;
}

double fd_hessian_sup(const ScalarField& W) {
  const TorusGrid& g = W.grid;
  const double h2 = g.h * g.h;
  double m = 0.0;
  for (std::size_t i = 0; i < W.size(); ++i) {
    auto idx = g.unravel(i);
    double frob2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      auto ip = idx, im = idx;
      ip[a] = (idx[a] + 1) % g.n;
      im[a] = (idx[a] + g.n - 1) % g.n;
      double daa =
          (W.values[g.ravel(ip)] - 2.0 * W.values[i] + W.values[g.ravel(im)]) / h2;
      frob2 += daa * daa;
      for (int b = a + 1; b < g.d; ++b) {
        auto pp = idx, pm = idx, mp = idx, mm = idx;
        pp[a] = ip[a]; pp[b] = (idx[b] + 1) % g.n;
        pm[a] = ip[a]; pm[b] = (idx[b] + g.n - 1) % g.n;
        mp[a] = im[a]; mp[b] = pp[b];
        mm[a] = im[a]; mm[b] = pm[b];
        double dab = (W.values[g.ravel(pp)] - W.values[g.ravel(pm)] -
                      W.values[g.ravel(mp)] + W.values[g.ravel(mm)]) /
                     (4.0 * h2);
        frob2 += 2.0 * dab * dab;
      }
    }
    m = std::max(m, frob2);
  }
  return std::sqrt(m);
}

}  // namespace

SampledPotential sample_potential(const Potential& p, const TorusGrid& g) {
  SampledPotential out;
  switch (p.kind) {
    case Potential::Kind::zero: {
      out.W = ScalarField(g, 0.0);
      out.gradW = VectorField(g);
      return out;
    }
    case Potential::Kind::trigonometric: {
      out.W = ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
        double s = 0.0;
        for (const auto& m : p.modes) {
          double ph = m.phase;
          for (int a = 0; a < g.d; ++a) ph += kTwoPi * m.k[a] * x[a];
          s += m.amplitude * std::cos(ph);
        }
        return s;
      });
      out.gradW = VectorField(g);
      for (int axis = 0; axis < g.d; ++axis) {
        out.gradW.comp[axis] =
            ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
              double s = 0.0;
              for (const auto& m : p.modes) {
                double ph = m.phase;
                for (int a = 0; a < g.d; ++a) ph += kTwoPi * m.k[a] * x[a];
                s -= m.amplitude * kTwoPi * m.k[axis] * std::sin(ph);
              }
              return s;
            });
      }
      out.grad_sup = sup_norm(out.gradW);
      // Analytic Hessian sampled at the nodes, Frobenius norm.
      double hess = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unravel(i);
        std::array<double, 3> x{0, 0, 0};
        for (int a = 0; a < g.d; ++a) x[a] = g.coord(idx[a]);
        double frob2 = 0.0;
        for (int a = 0; a < g.d; ++a)
          for (int b = 0; b < g.d; ++b) {
            double e = 0.0;
            for (const auto& m : p.modes) {
              double ph = m.phase;
              for (int c = 0; c < g.d; ++c) ph += kTwoPi * m.k[c] * x[c];
              e -= m.amplitude * kTwoPi * kTwoPi * m.k[a] * m.k[b] * std::cos(ph);
            }
            frob2 += e * e;
          }
        hess = std::max(hess, frob2);
      }
      out.hessian_sup = std::sqrt(hess);
      break;
    }
    case Potential::Kind::morse:
    case Potential::Kind::power_law: {
      if (p.kind == Potential::Kind::power_law && (p.a < 2.0 || p.b < 2.0)) {
        out.hypothesis_violation = true;
        out.warnings.push_back(
            "power-law potential needs exponents a, b >= 2; smaller exponents are "
            "not C^{1,1} on the torus");
      }
      if (p.kind == Potential::Kind::morse && p.CR > 0.0 && p.lR > 0.0) {
        double C = p.CA / p.CR;
        double l = p.lA / p.lR;
        if (C * std::pow(l, g.d) >= 1.0)
          out.warnings.push_back(
              "morse parameters are outside the well-prepared regime "
              "(C_A/C_R * (l_A/l_R)^d >= 1)");
      }
      ScalarField raw =
          ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
            double r = torus_distance(x, g.d);
            return p.kind == Potential::Kind::morse ? morse_w(p, r) : power_law_w(p, r);
          });
      double eps = p.eps_per >= 0.0 ? p.eps_per : 2.0 * g.h;
      out.W = mollify(raw, eps);
      out.gradW = gradient(out.W);
      out.grad_sup = sup_norm(out.gradW);
      out.hessian_sup = spectral_hessian_sup(out.W);
      break;
    }
    case Potential::Kind::tabulated: {
      if (!p.table) throw std::invalid_argument("tabulated potential has no table");
      require_same_grid(p.table->grid, g, "sample_potential");
      out.W = p.eps_per > 0.0 ? mollify(*p.table, p.eps_per) : *p.table;
      out.gradW = gradient(out.W);
      out.grad_sup = sup_norm(out.gradW);
      // Finite differences on purpose: a seam jump shows up as a huge value
      // instead of spectral ringing.
      out.hessian_sup = fd_hessian_sup(out.W);
      break;
    }
  }
  out.w_sup = sup_norm(out.W);
  out.w_l2 = l2_norm(out.W);
  out.discontinuity_indicator = second_difference_sup(out.W);
  return out;
}

ScalarField derive_U_from_L(const LocalRunningCost& L, const ScalarField& m) {
  require_finite(m, "derive_U_from_L");
  if (L.c != 0.0 && !L.has_derivative)
    throw std::invalid_argument(
        "derive_U_from_L: running cost lacks an analytic density derivative");
  ScalarField out(m.grid, 0.0);
  if (L.V) {
    require_same_grid(L.V->grid, m.grid, "derive_U_from_L");
    out = *L.V;
  }
  if (L.c != 0.0) {
    for (std::size_t i = 0; i < m.size(); ++i)
      out.values[i] += L.c * (1.0 + L.p) * std::pow(m.values[i], L.p);
  }
  return out;
}

Coupling Coupling::constant(double c) {
  Coupling u;
  u.kind_ = Kind::constant;
  u.c_ = c;
  u.sup_bound_ = std::abs(c);
  u.c2_bound_ = std::abs(c);
  return u;
}

Coupling Coupling::additive_nonlocal(ScalarField V, const Potential& K,
                                     const TorusGrid& g) {
  require_same_grid(V.grid, g, "Coupling::additive_nonlocal");
  require_finite(V, "Coupling::additive_nonlocal");
  Coupling u;
  u.kind_ = Kind::additive_nonlocal;
  SampledPotential sk = sample_potential(K, g);
  u.V_ = std::move(V);
  u.K_ = sk.W;
  u.K_half_ = 0.5 * sk.W;
  u.k_l2_ = sk.w_l2;
  VectorField gv = gradient(u.V_);
  // For unit-mass nonnegative m: |K*m| <= sup|K|, |grad(K*m)| <= sup|grad K|.
  u.sup_bound_ = sup_norm(u.V_) + sk.w_sup;
  u.grad_sup_bound_ = sup_norm(gv) + sk.grad_sup;
  u.c2_bound_ = u.sup_bound_ + u.grad_sup_bound_ +
                spectral_hessian_sup(u.V_) + sk.hessian_sup;
  return u;
}

Coupling Coupling::local_power(double c1, double p, double m_sat) {
  if (!(m_sat > 0.0))
    throw std::invalid_argument("Coupling::local_power: saturation cap must be positive");
  if (!(p > 0.0))
    throw std::invalid_argument("Coupling::local_power: exponent must be positive");
  Coupling u;
  u.kind_ = Kind::local_power;
  u.c1_ = c1;
  u.p_ = p;
  u.m_sat_ = m_sat;
  u.sup_bound_ = std::abs(c1) * std::pow(m_sat, p);
  u.grad_sup_bound_ = std::abs(c1) * p * std::pow(m_sat, p - 1.0);
  u.c2_bound_ = u.sup_bound_ + u.grad_sup_bound_;
  return u;
}

ScalarField Coupling::evaluate(const ScalarField& m) const {
  require_finite(m, "Coupling::evaluate");
  switch (kind_) {
    case Kind::constant:
      return ScalarField(m.grid, c_);
    case Kind::additive_nonlocal:
      require_same_grid(V_.grid, m.grid, "Coupling::evaluate");
      return V_ + convolve(K_, m);
    case Kind::local_power: {
      ScalarField out(m.grid);
      for (std::size_t i = 0; i < m.size(); ++i)
        out.values[i] = c1_ * std::pow(std::min(m.values[i], m_sat_), p_);
      return out;
    }
  }
  throw std::logic_error("Coupling::evaluate: unreachable");
}

ScalarField Coupling::running_cost(const ScalarField& m) const {
  require_finite(m, "Coupling::running_cost");
  switch (kind_) {
    case Kind::constant:
      return ScalarField(m.grid, c_);
    case Kind::additive_nonlocal:
      // U = V + K*m is the density derivative of int V rho + 1/2 int (K*rho) rho
      // for an even kernel, so the running-cost density is V + (K/2)*m.
      require_same_grid(V_.grid, m.grid, "Coupling::running_cost");
      return V_ + convolve(K_half_, m);
    case Kind::local_power: {
      // U = c1 r^p = d/dr [c1 r^(p+1)/(p+1)], so L = c1 r^p/(p+1).
      ScalarField out(m.grid);
      for (std::size_t i = 0; i < m.size(); ++i)
        out.values[i] = c1_ * std::pow(std::min(m.values[i], m_sat_), p_) / (p_ + 1.0);
      return out;
    }
  }
  throw std::logic_error("Coupling::running_cost: unreachable");
}

double Coupling::lipschitz_l2(const TorusGrid& g) const {
  switch (kind_) {
    case Kind::constant:
      return 0.0;
    case Kind::additive_nonlocal:
      return k_l2_;
    case Kind::local_power: {
      // Pointwise Lipschitz constant lifted to the grid L2 norm.
      double hd = 1.0;
      for (int a = 0; a < g.d; ++a) hd *= g.h;
      return std::abs(c1_) * p_ * std::pow(m_sat_, p_ - 1.0) / std::sqrt(hd);
    }
  }
  throw std::logic_error("Coupling::lipschitz_l2: unreachable");
}

ProblemSpec make_problem(const TorusGrid& grid, const TimeMesh& mesh,
                         const Potential& potential, Coupling coupling,
                         ScalarField rho0, ScalarField phiT, double cfl_safety) {
  require_same_grid(rho0.grid, grid, "make_problem(rho0)");
  require_same_grid(phiT.grid, grid, "make_problem(phiT)");
  require_finite(rho0, "make_problem(rho0)");
  require_finite(phiT, "make_problem(phiT)");
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
    throw std::invalid_argument("make_problem: cfl_safety must be in (0, 1]");
  ProblemSpec spec;
  spec.grid = grid;
  spec.mesh = mesh;
  spec.potential = potential;
  spec.sampled = sample_potential(potential, grid);
  spec.coupling = std::move(coupling);
  spec.rho0 = std::move(rho0);
  spec.phiT = std::move(phiT);
  spec.cfl_safety = cfl_safety;
  return spec;
}

AssumptionReport validate_assumptions(const ProblemSpec& spec) {
  AssumptionReport report;
  report.warnings = spec.sampled.warnings;

  {
    AssumptionCheck c;
    c.name = "potential_regularity";
    double osc = 0.0;
    if (!spec.sampled.W.values.empty()) {
      double lo = spec.sampled.W.values[0], hi = lo;
      for (double v : spec.sampled.W.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      osc = hi - lo;
    }
    bool finite = std::isfinite(spec.sampled.grad_sup) &&
                  std::isfinite(spec.sampled.hessian_sup);
    bool smooth =
        spec.sampled.discontinuity_indicator <= 0.25 * std::max(osc, 1e-12);
    c.pass = finite && smooth && !spec.sampled.hypothesis_violation;
    std::ostringstream os;
    os << "sup|gradW|=" << spec.sampled.grad_sup
       << " sup|hessW|=" << spec.sampled.hessian_sup
       << " seam_indicator=" << spec.sampled.discontinuity_indicator;
    if (!smooth) os << " (second differences inconsistent with a C^{1,1} sample)";
    if (spec.sampled.hypothesis_violation)
      os << " (declared potential family violates the regularity hypotheses)";
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {
    AssumptionCheck c;
    c.name = "coupling_continuity";
    const double c_lip = spec.coupling.lipschitz_l2(spec.grid);
    std::mt19937_64 rng(0x5eedu);
    std::uniform_real_distribution<double> amp(-0.4, 0.4);
    std::uniform_int_distribution<int> mode(1, 3);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    auto random_density = [&]() {
      ScalarField m =
          ScalarField::from_function(spec.grid, [&](const std::array<double, 3>&) {
            return 1.0;
          });
      for (int j = 0; j < 3; ++j) {
        std::array<int, 3> k{0, 0, 0};
        for (int a = 0; a < spec.grid.d; ++a) k[a] = mode(rng);
        double A = amp(rng), ph = phase(rng);
        ScalarField bump =
            ScalarField::from_function(spec.grid, [&](const std::array<double, 3>& x) {
              double p = ph;
              for (int a = 0; a < spec.grid.d; ++a) p += kTwoPi * k[a] * x[a];
              return A * std::cos(p);
            });
        axpy(1.0, bump, m);
      }
      for (double& v : m.values) v = std::max(v, 0.0);
      double mass = integrate(m);
      if (mass > 0) for (double& v : m.values) v /= mass;
      return m;
    };
    bool ok = true;
    double worst_ratio = 0.0, worst_sup = 0.0;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      ScalarField m1 = random_density();
      ScalarField m2 = random_density();
      ScalarField u1 = spec.coupling.evaluate(m1);
      ScalarField u2 = spec.coupling.evaluate(m2);
      worst_sup = std::max({worst_sup, sup_norm(u1), sup_norm(u2)});
      double gap = sup_norm(u1 - u2);
      double dist = l2_norm(m1 - m2);
      if (dist > 1e-14) worst_ratio = std::max(worst_ratio, gap / dist);
      if (!all_finite(u1) || !all_finite(u2)) ok = false;
    }
    bool lipschitz_ok = worst_ratio <= c_lip * (1.0 + 1e-9) + 1e-12;
    bool bounded_ok = worst_sup <= spec.coupling.sup_bound() * (1.0 + 1e-9) + 1e-12;
    c.pass = ok && lipschitz_ok && bounded_ok;
    std::ostringstream os;
    os << "measured_lipschitz=" << worst_ratio << " reported=" << c_lip
       << " measured_sup=" << worst_sup << " reported=" << spec.coupling.sup_bound();
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {
    AssumptionCheck c;
    c.name = "initial_terminal_data";
    double mass = integrate(spec.rho0);
    double mn = min_value(spec.rho0);
    bool mass_ok = std::abs(mass - 1.0) <= 1e-12;
    bool pos_ok = mn >= 0.0;
    bool phiT_ok = all_finite(spec.phiT);
    c.pass = mass_ok && pos_ok && phiT_ok;
    std::ostringstream os;
    os << "mass=" << mass << " min_rho0=" << mn
       << (phiT_ok ? "" : " phiT non-finite");
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  return report;
}

}  // namespace mfoc
