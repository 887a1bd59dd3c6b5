#include "mfoc/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mfoc/hjb.hpp"

namespace mfoc {

namespace {

double wrap_unit(double x) {
  x -= std::floor(x + 0.5);
  // floor rounding can land exactly on +1/2
  if (x >= 0.5) x -= 1.0;
  return x;
}

void wrap(std::array<double, 3>& x, int d) {
  for (int a = 0; a < d; ++a) x[a] = wrap_unit(x[a]);
}

double torus_metric(const std::array<double, 3>& a, const std::array<double, 3>& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double dx = wrap_unit(a[i] - b[i]);
    s += dx * dx;
  }
  return std::sqrt(s);
}

/// Cloud-in-cell deposition of an equal-weight cloud onto the grid,
/// normalized to unit mass.
ScalarField deposit(const ParticleCloud& cloud, const TorusGrid& g) {
  ScalarField rho(g, 0.0);
  double hd = 1.0;
  for (int a = 0; a < g.d; ++a) hd *= g.h;
  const double w = 1.0 / (cloud.size() * hd);
  for (const auto& x : cloud.pos) {
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0, 0, 0};
    for (int a = 0; a < g.d; ++a) {
      double u = (x[a] + 0.5) / g.h;
      double fl = std::floor(u);
      base[a] = static_cast<int>(fl);
      frac[a] = u - fl;
    }
    const int corners = 1 << g.d;
    for (int c = 0; c < corners; ++c) {
      std::array<int, 3> idx{0, 0, 0};
      double wc = w;
      for (int a = 0; a < g.d; ++a) {
        int off = (c >> a) & 1;
        idx[a] = (base[a] + off) % g.n;
        wc *= off ? frac[a] : 1.0 - frac[a];
      }
      rho.values[g.ravel(idx)] += wc;
    }
  }
  return rho;
}

/// Pairwise empirical interaction force (1/N) sum_j grad W(x_i - x_j),
/// with grad W interpolated from its nodal samples.
std::array<double, 3> pairwise_force(const ParticleCloud& cloud, std::size_t i,
                                     const VectorField& gradW) {
  std::array<double, 3> f{0, 0, 0};
  const int d = cloud.d;
  for (const auto& xj : cloud.pos) {
    std::array<double, 3> delta{0, 0, 0};
    for (int a = 0; a < d; ++a) delta[a] = wrap_unit(cloud.pos[i][a] - xj[a]);
    for (int a = 0; a < d; ++a) f[a] += interpolate(gradW.comp[a], delta);
  }
  for (int a = 0; a < d; ++a) f[a] /= cloud.size();
  return f;
}

constexpr int kPairwiseLimit = 512;

// ---- exact periodic 1-d Wasserstein machinery ----

/// One measure as sorted (position, weight) atoms on [-1/2, 1/2).
struct Atoms {
  std::vector<double> x;
  std::vector<double> w;
};

Atoms cloud_atoms(const ParticleCloud& c) {
  Atoms a;
  a.x.reserve(c.size());
  for (const auto& p : c.pos) a.x.push_back(p[0]);
  std::sort(a.x.begin(), a.x.end());
  a.w.assign(c.size(), 1.0 / c.size());
  return a;
}

/// d=1 distance between CDF-representable measures: the optimal rotation of
/// the circle makes the CDF difference have weighted median zero, so
/// d1 = int |F_a - F_b - median| dx.
double w1_periodic_1d(const std::vector<double>& grid_x,
                      const std::vector<double>& diff,
                      const std::vector<double>& seg_len) {
  // weighted median of diff under seg_len
  std::vector<std::size_t> order(diff.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return diff[i] < diff[j]; });
  double total = std::accumulate(seg_len.begin(), seg_len.end(), 0.0);
  double acc = 0.0;
  double median = diff[order.back()];
  for (std::size_t r : order) {
    acc += seg_len[r];
    if (acc >= 0.5 * total) {
      median = diff[r];
      break;
    }
  }
  (void)grid_x;
  double dist = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i)
    dist += seg_len[i] * std::abs(diff[i] - median);
  return dist;
}

double w1_clouds_1d(const ParticleCloud& ca, const ParticleCloud& cb) {
  Atoms a = cloud_atoms(ca), b = cloud_atoms(cb);
  // merged breakpoints; CDF difference is piecewise constant between them
  struct Event {
    double x;
    double da, db;
  };
  std::vector<Event> ev;
  ev.reserve(a.x.size() + b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) ev.push_back({a.x[i], a.w[i], 0.0});
  for (std::size_t i = 0; i < b.x.size(); ++i) ev.push_back({b.x[i], 0.0, b.w[i]});
  std::sort(ev.begin(), ev.end(), [](const Event& l, const Event& r) { return l.x < r.x; });
  std::vector<double> diff, seg;
  diff.reserve(ev.size());
  seg.reserve(ev.size());
  double g = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    g += ev[i].da - ev[i].db;
    double next = (i + 1 < ev.size()) ? ev[i + 1].x : ev[0].x + 1.0;
    diff.push_back(g);
    seg.push_back(next - ev[i].x);
  }
  return w1_periodic_1d({}, diff, seg);
}

/// Piecewise-linear CDF of a nonnegative nodal density (constant per cell).
struct FieldCdf {
  const ScalarField* f;
  std::vector<double> cum;  // cumulative mass up to cell start
  double hd;

  explicit FieldCdf(const ScalarField& field) : f(&field) {
    const TorusGrid& g = field.grid;
    hd = g.h;
    cum.resize(g.n + 1, 0.0);
    for (int i = 0; i < g.n; ++i) cum[i + 1] = cum[i] + field.values[i] * g.h;
  }

  /// F(x) for x in [-1/2, 1/2); cell i covers [x_i - h/2, x_i + h/2).
  double operator()(double x) const {
    const TorusGrid& g = f->grid;
    double u = (x + 0.5 + 0.5 * g.h) / g.h;  // cell index coordinate
    double fl = std::floor(u);
    int i = static_cast<int>(fl);
    double frac = u - fl;
    if (i >= g.n) return cum[g.n] + f->values[0] * g.h * frac;  // wrapped last half-cell
    if (i < 0) return f->values[0] * g.h * frac - f->values[0] * 0.0;
    return cum[i] + f->values[i] * g.h * frac;
  }

  double total() const { return cum.back(); }
};

double w1_dense_1d(const std::function<double(double)>& Fa,
                   const std::function<double(double)>& Fb) {
  constexpr int M = 1 << 16;
  std::vector<double> diff(M), seg(M, 1.0 / M);
  for (int m = 0; m < M; ++m) {
    double x = -0.5 + (m + 0.5) / M;
    diff[m] = Fa(x) - Fb(x);
  }
  return w1_periodic_1d({}, diff, seg);
}

double cloud_cdf_at(const Atoms& a, double x) {
  auto it = std::upper_bound(a.x.begin(), a.x.end(), x);
  return static_cast<double>(it - a.x.begin()) / static_cast<double>(a.x.size());
}

/// Exact assignment cost (Jonker-Volgenant shortest augmenting paths).
double assignment_cost(const std::vector<std::array<double, 3>>& A,
                       const std::vector<std::array<double, 3>>& B, int d) {
  const int n = static_cast<int>(A.size());
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, INF);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = match[j0], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = torus_metric(A[i0 - 1], B[j - 1], d) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  double cost = 0.0;
  for (int j = 1; j <= n; ++j) cost += torus_metric(A[match[j] - 1], B[j - 1], d);
  return cost / n;
}

std::vector<std::array<double, 3>> subsample(const ParticleCloud& c, int m) {
  std::vector<std::array<double, 3>> out;
  out.reserve(m);
  const double stride = static_cast<double>(c.size()) / m;
  for (int i = 0; i < m; ++i)
    out.push_back(c.pos[static_cast<std::size_t>(i * stride)]);
  return out;
}

void require_unit_mass(double mass, const std::string& what) {
  if (std::abs(mass - 1.0) > 1e-8)
    throw std::invalid_argument(what + ": measure mass " + std::to_string(mass) +
                                " is not 1");
}

}  // namespace

double interpolate(const ScalarField& f, const std::array<double, 3>& x) {
  const TorusGrid& g = f.grid;
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0, 0, 0};
  for (int a = 0; a < g.d; ++a) {
    double u = (wrap_unit(x[a]) + 0.5) / g.h;
    double fl = std::floor(u);
    base[a] = static_cast<int>(fl) % g.n;
    frac[a] = u - fl;
  }
  double acc = 0.0;
  const int corners = 1 << g.d;
  for (int c = 0; c < corners; ++c) {
    std::array<int, 3> idx{0, 0, 0};
    double wc = 1.0;
    for (int a = 0; a < g.d; ++a) {
      int off = (c >> a) & 1;
      idx[a] = (base[a] + off) % g.n;
      wc *= off ? frac[a] : 1.0 - frac[a];
    }
    acc += wc * f.values[g.ravel(idx)];
  }
  return acc;
}

ParticleCloud sample_from_density(const ScalarField& rho, int N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("sample_from_density: N must be >= 1");
  require_finite(rho, "sample_from_density");
  const TorusGrid& g = rho.grid;
  require_unit_mass(integrate(rho), "sample_from_density");
  ParticleCloud cloud;
  cloud.d = g.d;
  cloud.seed = seed;
  cloud.pos.resize(N);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (g.d == 1) {
    FieldCdf F(rho);
    for (auto& x : cloud.pos) {
      double u = unif(rng) * F.total();
      // invert the piecewise-linear CDF cell by cell
      int lo = 0, hi = g.n;
      while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (F.cum[mid + 1] < u)
          lo = mid + 1;
        else
          hi = mid;
      }
      double cell_mass = rho.values[lo] * g.h;
      double frac = cell_mass > 0.0 ? (u - F.cum[lo]) / cell_mass : 0.5;
      double cell_start = g.coord(lo) - 0.5 * g.h;
      x = {wrap_unit(cell_start + frac * g.h), 0.0, 0.0};
    }
  } else {
    double bound = 0.0;
    for (double v : rho.values) bound = std::max(bound, v);
    for (auto& x : cloud.pos) {
      for (;;) {
        std::array<double, 3> cand{0, 0, 0};
        for (int a = 0; a < g.d; ++a) cand[a] = unif(rng) - 0.5;
        if (unif(rng) * bound <= interpolate(rho, cand)) {
          x = cand;
          break;
        }
      }
    }
  }
  return cloud;
}

ParticleCloud simulate_mkv(const ProblemSpec& spec, const ValueTrajectory& Phi, int N,
                           std::uint64_t seed, const StepObserver& observer) {
  if (N < 1) throw std::invalid_argument("simulate_mkv: N must be >= 1");
  if (Phi.mesh != spec.mesh)
    throw std::invalid_argument("simulate_mkv: value trajectory mesh mismatch");
  auto grads = trajectory_gradients(Phi);
  ParticleCloud cloud = sample_from_density(spec.rho0, N, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = spec.mesh.dt;
  const double noise = std::sqrt(2.0 * dt);
  if (observer) observer(0, cloud);
  for (int k = 0; k < spec.mesh.nt; ++k) {
    VectorField conv_force(spec.grid);
    const bool use_grid = N > kPairwiseLimit;
    if (use_grid) {
      ScalarField emp = deposit(cloud, spec.grid);
      for (int a = 0; a < spec.grid.d; ++a)
        conv_force.comp[a] = convolve(spec.sampled.gradW.comp[a], emp);
    }
    ParticleCloud next = cloud;
    for (std::size_t i = 0; i < cloud.pos.size(); ++i) {
      std::array<double, 3> force{0, 0, 0};
      if (use_grid) {
        for (int a = 0; a < spec.grid.d; ++a)
          force[a] = interpolate(conv_force.comp[a], cloud.pos[i]);
      } else {
        force = pairwise_force(cloud, i, spec.sampled.gradW);
      }
      for (int a = 0; a < spec.grid.d; ++a) {
        double drift = -(force[a] + interpolate(grads[k].comp[a], cloud.pos[i]));
        next.pos[i][a] = cloud.pos[i][a] + dt * drift + noise * gauss(rng);
      }
      wrap(next.pos[i], spec.grid.d);
    }
    cloud = std::move(next);
    cloud.t = spec.mesh.time(k + 1);
    if (observer) observer(k + 1, cloud);
  }
  return cloud;
}

ParticleCloud simulate_adjoint(const ProblemSpec& spec, const DensityTrajectory& rho,
                               const ValueTrajectory& Phi, const std::array<double, 3>& x0,
                               int k0, AdjointMode mode, int N, std::uint64_t seed,
                               const StepObserver& observer) {
  if (N < 1) throw std::invalid_argument("simulate_adjoint: N must be >= 1");
  if (k0 < 0 || k0 >= spec.mesh.nt)
    throw std::invalid_argument("simulate_adjoint: start node must satisfy t0 < T");
  if (rho.mesh != spec.mesh || Phi.mesh != spec.mesh)
    throw std::invalid_argument("simulate_adjoint: trajectory mesh mismatch");

  // Per-node drift fields, precomputed once.
  std::vector<VectorField> drift;
  drift.reserve(spec.mesh.nt + 1);
  for (int k = 0; k <= spec.mesh.nt; ++k) {
    VectorField b(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a) {
      b.comp[a] = convolve(spec.sampled.gradW.comp[a], rho.at(k));
      for (double& v : b.comp[a].values) v = -v;
    }
    if (mode == AdjointMode::optimal) {
      VectorField gp = gradient(Phi.at(k));
      for (int a = 0; a < spec.grid.d; ++a) axpy(-1.0, gp.comp[a], b.comp[a]);
    }
    drift.push_back(std::move(b));
  }

  ParticleCloud cloud;
  cloud.d = spec.grid.d;
  cloud.seed = seed;
  cloud.t = spec.mesh.time(k0);
  std::array<double, 3> start = x0;
  wrap(start, spec.grid.d);
  cloud.pos.assign(N, start);
  std::mt19937_64 rng(seed ^ 0x517cc1b727220a95ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = spec.mesh.dt;
  const double noise = std::sqrt(2.0 * dt);
  if (observer) observer(k0, cloud);
  for (int k = k0; k < spec.mesh.nt; ++k) {
    for (auto& x : cloud.pos) {
      std::array<double, 3> nx = x;
      for (int a = 0; a < spec.grid.d; ++a)
        nx[a] += dt * interpolate(drift[k].comp[a], x) + noise * gauss(rng);
      wrap(nx, spec.grid.d);
      x = nx;
    }
    cloud.t = spec.mesh.time(k + 1);
    if (observer) observer(k + 1, cloud);
  }
  return cloud;
}

double wasserstein1(const ParticleCloud& a, const ParticleCloud& b) {
  if (a.d != b.d) throw std::invalid_argument("wasserstein1: dimension mismatch");
  if (a.d == 1) return w1_clouds_1d(a, b);
  const int m = std::min({a.size(), b.size(), kPairwiseLimit});
  return assignment_cost(subsample(a, m), subsample(b, m), a.d);
}

double wasserstein1(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "wasserstein1");
  if (min_value(a) < -1e-12 || min_value(b) < -1e-12)
    throw std::invalid_argument("wasserstein1: densities must be nonnegative");
  require_unit_mass(integrate(a), "wasserstein1");
  require_unit_mass(integrate(b), "wasserstein1");
  if (a.grid.d == 1) {
    FieldCdf Fa(a), Fb(b);
    return w1_dense_1d([&](double x) { return Fa(x); }, [&](double x) { return Fb(x); });
  }
  ParticleCloud ca = sample_from_density(a, kPairwiseLimit, 12345);
  ParticleCloud cb = sample_from_density(b, kPairwiseLimit, 54321);
  return wasserstein1(ca, cb);
}

double wasserstein1(const ParticleCloud& a, const ScalarField& b) {
  if (a.d != b.grid.d) throw std::invalid_argument("wasserstein1: dimension mismatch");
  require_unit_mass(integrate(b), "wasserstein1");
  if (a.d == 1) {
    Atoms atoms = cloud_atoms(a);
    FieldCdf Fb(b);
    return w1_dense_1d([&](double x) { return cloud_cdf_at(atoms, x); },
                       [&](double x) { return Fb(x); });
  }
  ParticleCloud cb = sample_from_density(b, std::min(a.size(), kPairwiseLimit), 777);
  return wasserstein1(a, cb);
}

ValueIdentityReport verify_value_identity(const ProblemSpec& spec,
                                          const SolutionPair& pair,
                                          const ValueTrajectory& phi_prev,
                                          const std::array<double, 3>& x0, int k0,
                                          int N, std::uint64_t seed) {
  const int nt = spec.mesh.nt;
  const double dt = spec.mesh.dt;
  ValueIdentityReport rep;
  rep.x0 = x0;
  rep.t0 = spec.mesh.time(k0);

  // Integrand fields per time node.
  SourceAssembly src = assemble_source(spec, pair.rho, phi_prev);
  auto grads_phi_prev = trajectory_gradients(phi_prev);
  std::vector<ScalarField> grad_sq, nonlocal, coupling;
  grad_sq.reserve(nt + 1);
  nonlocal.reserve(nt + 1);
  coupling.reserve(nt + 1);
  double int_grad_phi_sup = 0.0;  // int_{t0}^T ||grad phi_prev||_inf dt (trapezoid)
  for (int k = 0; k <= nt; ++k) {
    VectorField gp = gradient(pair.Phi.at(k));
    ScalarField gs(spec.grid, 0.0);
    for (int a = 0; a < spec.grid.d; ++a)
      for (std::size_t i = 0; i < gs.size(); ++i)
        gs.values[i] += 0.5 * gp.comp[a].values[i] * gp.comp[a].values[i];
    grad_sq.push_back(std::move(gs));
    ScalarField u = spec.coupling.evaluate(pair.rho.at(k));
    // nonlocal term = U - f from the source assembly
    nonlocal.push_back(u - src.f[k]);
    coupling.push_back(std::move(u));
    if (k >= k0) {
      double w = (k == k0 || k == nt) ? 0.5 : 1.0;
      int_grad_phi_sup += w * dt * sup_norm(grads_phi_prev[k]);
    }
  }

  constexpr int kBatches = 16;
  const int per_batch = std::max(1, N / kBatches);

  auto run_flow = [&](AdjointMode mode, std::uint64_t s, bool full_identity,
                      std::vector<double>& batch_vals, std::vector<double>& term_sums) {
    // term_sums: [terminal, grad, nonlocal, coupling] accumulated over all batches
    term_sums.assign(4, 0.0);
    for (int bidx = 0; bidx < kBatches; ++bidx) {
      std::vector<double> acc_grad(per_batch, 0.0), acc_nl(per_batch, 0.0),
          acc_u(per_batch, 0.0);
      StepObserver obs = [&](int k, const ParticleCloud& c) {
        double w = (k == k0 || k == nt) ? 0.5 : 1.0;
        for (int i = 0; i < per_batch; ++i) {
          acc_grad[i] += w * dt * interpolate(grad_sq[k], c.pos[i]);
          if (full_identity) {
            acc_nl[i] += w * dt * interpolate(nonlocal[k], c.pos[i]);
            acc_u[i] += w * dt * interpolate(coupling[k], c.pos[i]);
          }
        }
      };
      ParticleCloud fin = simulate_adjoint(spec, pair.rho, pair.Phi, x0, k0, mode,
                                           per_batch, s + 1000003ull * bidx, obs);
      double mean = 0.0;
      for (int i = 0; i < per_batch; ++i) {
        double terminal = interpolate(spec.phiT, fin.pos[i]);
        double val = full_identity
                         ? terminal - acc_grad[i] - acc_nl[i] + acc_u[i]
                         : acc_grad[i];
        mean += val;
        term_sums[0] += terminal;
        term_sums[1] += acc_grad[i];
        term_sums[2] += acc_nl[i];
        term_sums[3] += acc_u[i];
      }
      batch_vals.push_back(mean / per_batch);
    }
    for (double& v : term_sums) v /= static_cast<double>(kBatches) * per_batch;
  };

  auto mean_stderr = [](const std::vector<double>& vals) {
    double m = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - m) * (v - m);
    var /= vals.size() > 1 ? vals.size() - 1 : 1;
    return std::pair<double, double>(m, std::sqrt(var / vals.size()));
  };

  {
    std::vector<double> batches, terms;
    run_flow(AdjointMode::zero_velocity, seed, true, batches, terms);
    auto [m, se] = mean_stderr(batches);
    rep.terminal_term = terms[0];
    rep.gradient_term = terms[1];
    rep.nonlocal_term = terms[2];
    rep.coupling_term = terms[3];
    rep.estimate = m;
    rep.stderr_zeta = se;
  }
  {
    std::vector<double> batches, terms;
    run_flow(AdjointMode::optimal, seed ^ 0xabcdefull, false, batches, terms);
    auto [m, se] = mean_stderr(batches);
    rep.gradient_energy_eta = m;
    rep.stderr_eta = se;
  }

  rep.grid_value = interpolate(pair.Phi.at(k0), x0);
  rep.residual = rep.estimate - rep.grid_value;
  rep.gradient_energy_budget = 2.0 * sup_norm(spec.phiT) +
                               2.0 * spec.sampled.grad_sup * int_grad_phi_sup +
                               2.0 * (spec.mesh.T - rep.t0) * spec.coupling.sup_bound();
  return rep;
}

}  // namespace mfoc
