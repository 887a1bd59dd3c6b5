#include "mfoc/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "json.hpp"
#include "mfoc/field_io.hpp"
#include "mfoc/particles.hpp"

namespace mfoc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
  }
}

double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  if (!j[key].is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return j[key].get<double>();
}

double get_number_or(const json& j, const char* key, double fallback,
                     const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  if (!j[key].is_number_integer())
    throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return j[key].get<int>();
}

std::vector<TrigMode> parse_modes(const json& j, int d, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": \"modes\" must be an array");
  std::vector<TrigMode> modes;
  for (const auto& m : j) {
    check_keys(m, {"k", "amplitude", "phase"}, where + ".modes[]");
    TrigMode mode;
    if (!m.contains("k")) throw ConfigError(where + ": mode missing \"k\"");
    if (m["k"].is_number_integer()) {
      mode.k[0] = m["k"].get<int>();
    } else if (m["k"].is_array()) {
      if (static_cast<int>(m["k"].size()) != d)
        throw ConfigError(where + ": mode wave vector length must equal the dimension");
      for (int a = 0; a < d; ++a) mode.k[a] = m["k"][a].get<int>();
    } else {
      throw ConfigError(where + ": mode \"k\" must be an integer or array");
    }
    mode.amplitude = get_number(m, "amplitude", where + ".modes[]");
    mode.phase = get_number_or(m, "phase", 0.0, where + ".modes[]");
    modes.push_back(mode);
  }
  return modes;
}

ScalarField trig_field(const TorusGrid& g, double constant,
                       const std::vector<TrigMode>& modes) {
  return ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
    double v = constant;
    for (const auto& m : modes) {
      double arg = m.phase;
      for (int a = 0; a < g.d; ++a) arg += 2.0 * M_PI * m.k[a] * x[a];
      v += m.amplitude * std::cos(arg);
    }
    return v;
  });
}

/// Field descriptor: either a cosine series ("constant" + "modes") or a
/// snapshot file.
ScalarField parse_field(const json& j, const TorusGrid& g, const fs::path& base,
                        const std::string& where) {
  check_keys(j, {"constant", "modes", "file"}, where);
  if (j.contains("file")) {
    if (j.contains("constant") || j.contains("modes"))
      throw ConfigError(where + ": give either \"file\" or a cosine series, not both");
    fs::path p = j["file"].get<std::string>();
    if (p.is_relative()) p = base / p;
    ScalarField f = read_field_binary(p.string());
    if (f.grid != g) throw ConfigError(where + ": snapshot grid does not match the run grid");
    return f;
  }
  double constant = get_number_or(j, "constant", 0.0, where);
  std::vector<TrigMode> modes;
  if (j.contains("modes")) modes = parse_modes(j["modes"], g.d, where);
  return trig_field(g, constant, modes);
}

Potential parse_potential(const json& j, const TorusGrid& g, const fs::path& base,
                          const std::string& where) {
  check_keys(j, {"kind", "eps_per", "CA", "lA", "CR", "lR", "a", "b", "modes", "file"},
             where);
  if (!j.contains("kind")) throw ConfigError(where + ": missing \"kind\"");
  const std::string kind = j["kind"].get<std::string>();
  Potential p;
  p.eps_per = get_number_or(j, "eps_per", -1.0, where);
  if (kind == "zero") {
    p.kind = Potential::Kind::zero;
  } else if (kind == "morse") {
    p.kind = Potential::Kind::morse;
    p.CA = get_number(j, "CA", where);
    p.lA = get_number(j, "lA", where);
    p.CR = get_number(j, "CR", where);
    p.lR = get_number(j, "lR", where);
  } else if (kind == "power_law") {
    p.kind = Potential::Kind::power_law;
    p.a = get_number(j, "a", where);
    p.b = get_number(j, "b", where);
  } else if (kind == "trigonometric") {
    p.kind = Potential::Kind::trigonometric;
    if (!j.contains("modes")) throw ConfigError(where + ": trigonometric needs \"modes\"");
    p.modes = parse_modes(j["modes"], g.d, where);
  } else if (kind == "tabulated") {
    p.kind = Potential::Kind::tabulated;
    if (!j.contains("file")) throw ConfigError(where + ": tabulated needs \"file\"");
    fs::path path = j["file"].get<std::string>();
    if (path.is_relative()) path = base / path;
    ScalarField t = read_field_binary(path.string());
    if (t.grid != g) throw ConfigError(where + ": table grid does not match the run grid");
    p.table = std::move(t);
  } else {
    throw ConfigError(where + ": unknown potential kind \"" + kind + "\"");
  }
  return p;
}

Coupling parse_coupling(const json& j, const Potential& w, const TorusGrid& g,
                        const fs::path& base, const std::string& where) {
  check_keys(j, {"kind", "value", "V", "kernel", "c1", "p", "m_sat"}, where);
  if (!j.contains("kind")) throw ConfigError(where + ": missing \"kind\"");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "constant") {
    return Coupling::constant(get_number_or(j, "value", 0.0, where));
  }
  if (kind == "additive_nonlocal") {
    ScalarField V(g, 0.0);
    if (j.contains("V")) V = parse_field(j["V"], g, base, where + ".V");
    Potential kernel = w;
    if (j.contains("kernel")) {
      if (j["kernel"].is_string()) {
        if (j["kernel"].get<std::string>() != "potential")
          throw ConfigError(where + ": kernel must be \"potential\" or a potential object");
      } else {
        kernel = parse_potential(j["kernel"], g, base, where + ".kernel");
      }
    }
    return Coupling::additive_nonlocal(std::move(V), kernel, g);
  }
  if (kind == "local_power") {
    double c1 = get_number(j, "c1", where);
    double p = get_number(j, "p", where);
    double m_sat = get_number_or(j, "m_sat", 4.0, where);
    return Coupling::local_power(c1, p, m_sat);
  }
  throw ConfigError(where + ": unknown coupling kind \"" + kind + "\"");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json assumption_json(const AssumptionReport& rep) {
  json out;
  out["checks"] = json::array();
  for (const auto& c : rep.checks)
    out["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  out["warnings"] = rep.warnings;
  out["all_pass"] = rep.all_pass();
  return out;
}

json certification_json(const CertificationReport& rep) {
  json out;
  out["items"] = json::array();
  for (const auto& i : rep.items)
    out["items"].push_back({{"name", i.name},
                            {"pass", i.pass},
                            {"margin", i.margin},
                            {"detail", i.detail}});
  out["all_pass"] = rep.all_pass();
  return out;
}

void write_iteration_log(const fs::path& path, const IterationLog& log) {
  std::ofstream out(path);
  out << "k,residual,density_gap,envelope_margin,budget_violation\n";
  for (const auto& r : log.rows)
    out << r.k << ',' << r.residual << ',' << r.density_gap << ',' << r.envelope_margin
        << ',' << (r.budget_violation ? 1 : 0) << '\n';
}

void write_density_diagnostics(const fs::path& path, const DensityTrajectory& rho) {
  std::ofstream out(path);
  out << "t,mass,min_value,l2,drift_sup\n";
  out.precision(17);
  for (const auto& d : rho.diag)
    out << d.t << ',' << d.mass << ',' << d.min_value << ',' << d.l2 << ','
        << d.drift_sup << '\n';
}

void write_cloud_csv(const fs::path& path, const ParticleCloud& c) {
  std::ofstream out(path);
  out << "id";
  for (int a = 0; a < c.d; ++a) out << ",x" << a;
  out << '\n';
  out.precision(17);
  for (int i = 0; i < c.size(); ++i) {
    out << i;
    for (int a = 0; a < c.d; ++a) out << ',' << c.pos[i][a];
    out << '\n';
  }
}

constexpr std::uint32_t kTrajMagic = 0x54434F4Du;  // "MOCT" little-endian

void save_snaps(const std::string& path, const TimeMesh& mesh,
                const std::vector<ScalarField>& snaps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const TorusGrid& g = snaps.front().grid;
  auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put32(kTrajMagic);
  put32(1u);
  put32(static_cast<std::uint32_t>(g.d));
  put32(static_cast<std::uint32_t>(g.n));
  put32(static_cast<std::uint32_t>(mesh.nt));
  out.write(reinterpret_cast<const char*>(&mesh.T), sizeof(double));
  for (const auto& s : snaps)
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to " + path);
}

std::vector<ScalarField> load_snaps(const std::string& path, TimeMesh& mesh) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  auto get32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  if (get32() != kTrajMagic) throw std::runtime_error(path + ": not a trajectory file");
  if (get32() != 1u) throw std::runtime_error(path + ": unsupported version");
  const int d = static_cast<int>(get32());
  const int n = static_cast<int>(get32());
  const int nt = static_cast<int>(get32());
  double T = 0.0;
  in.read(reinterpret_cast<char*>(&T), sizeof(double));
  mesh = TimeMesh(T, nt);
  TorusGrid g(d, n);
  std::vector<ScalarField> snaps;
  snaps.reserve(nt + 1);
  for (int k = 0; k <= nt; ++k) {
    ScalarField f(g);
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated trajectory");
    snaps.push_back(std::move(f));
  }
  return snaps;
}

/// Spatial perturbation field: three random low-frequency cosine modes,
/// scattered over the components, normalized to unit sup norm.
VectorField random_perturbation(const TorusGrid& g, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> wave(-3, 3);
  std::uniform_int_distribution<int> comp(0, g.d - 1);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  VectorField delta(g);
  for (int m = 0; m < 3; ++m) {
    TrigMode mode;
    bool zero = true;
    while (zero) {
      for (int a = 0; a < g.d; ++a) {
        mode.k[a] = wave(rng);
        if (mode.k[a] != 0) zero = false;
      }
    }
    mode.amplitude = amp(rng);
    mode.phase = phase(rng);
    int target = comp(rng);
    ScalarField part = trig_field(g, 0.0, {mode});
    axpy(1.0, part, delta.comp[target]);
  }
  double s = sup_norm(delta);
  if (s > 0.0)
    for (int a = 0; a < g.d; ++a)
      for (double& v : delta.comp[a].values) v /= s;
  return delta;
}

double cost_of(const ProblemSpec& spec, const DensityTrajectory& rho,
               const std::vector<VectorField>& control) {
  const double dt = spec.mesh.dt;
  double running = 0.0;
  for (int k = 0; k <= spec.mesh.nt; ++k) {
    ScalarField integrand = spec.coupling.running_cost(rho.at(k));
    for (int a = 0; a < spec.grid.d; ++a)
      for (std::size_t i = 0; i < integrand.size(); ++i) {
        double f = control[k].comp[a].values[i];
        integrand.values[i] += 0.5 * f * f;
      }
    for (std::size_t i = 0; i < integrand.size(); ++i)
      integrand.values[i] *= rho.at(k).values[i];
    double w = (k == 0 || k == spec.mesh.nt) ? 0.5 : 1.0;
    running += w * dt * integrate(integrand);
  }
  ScalarField term = spec.phiT;
  for (std::size_t i = 0; i < term.size(); ++i) term.values[i] *= rho.final().values[i];
  return running + integrate(term);
}

}  // namespace

std::string resolve_output_dir(const OutputConfig& out) {
  const char* root = std::getenv("MFOC_OUTPUT_ROOT");
  if (!root || !*root) return out.directory;
  fs::path leaf = fs::path(out.directory).filename();
  if (leaf.empty()) leaf = "run";
  return (fs::path(root) / leaf).string();
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  const fs::path base = fs::path(path).parent_path();

  check_keys(j, {"problem", "solver", "particles", "output"}, "config");
  if (!j.contains("problem")) throw ConfigError("config: missing \"problem\"");
  const json& jp = j["problem"];
  check_keys(jp,
             {"grid", "mesh", "potential", "coupling", "rho0", "phi_T", "cfl_safety"},
             "problem");

  if (!jp.contains("grid")) throw ConfigError("problem: missing \"grid\"");
  check_keys(jp["grid"], {"d", "n"}, "problem.grid");
  TorusGrid grid(get_int(jp["grid"], "d", "problem.grid"),
                 get_int(jp["grid"], "n", "problem.grid"));

  if (!jp.contains("mesh")) throw ConfigError("problem: missing \"mesh\"");
  check_keys(jp["mesh"], {"T", "nt"}, "problem.mesh");
  TimeMesh mesh(get_number(jp["mesh"], "T", "problem.mesh"),
                get_int(jp["mesh"], "nt", "problem.mesh"));

  Potential w = Potential::zero_potential();
  if (jp.contains("potential")) w = parse_potential(jp["potential"], grid, base, "problem.potential");

  Coupling coupling = Coupling::constant(0.0);
  if (jp.contains("coupling"))
    coupling = parse_coupling(jp["coupling"], w, grid, base, "problem.coupling");

  if (!jp.contains("rho0")) throw ConfigError("problem: missing \"rho0\"");
  ScalarField rho0 = parse_field(jp["rho0"], grid, base, "problem.rho0");
  if (!jp.contains("phi_T")) throw ConfigError("problem: missing \"phi_T\"");
  ScalarField phiT = parse_field(jp["phi_T"], grid, base, "problem.phi_T");

  RunConfig cfg;
  const double mass = integrate(rho0);
  if (!(mass > 0.0)) throw ConfigError("problem.rho0: mass must be positive");
  const double defect = std::abs(mass - 1.0);
  if (defect > 1e-2)
    throw ConfigError("problem.rho0: mass " + std::to_string(mass) +
                      " is too far from 1 to renormalize");
  if (defect > 1e-12) {
    for (double& v : rho0.values) v /= mass;
    cfg.warnings.push_back("rho0 renormalized, input mass was " + std::to_string(mass));
  }
  if (min_value(rho0) < 0.0)
    throw ConfigError("problem.rho0: density must be nonnegative");

  double cfl_safety = get_number_or(jp, "cfl_safety", 0.9, "problem");
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
    throw ConfigError("problem.cfl_safety: must be in (0, 1]");

  if (j.contains("solver")) {
    const json& js = j["solver"];
    check_keys(js, {"theta", "tol", "max_iter"}, "solver");
    cfg.solver.theta = get_number_or(js, "theta", cfg.solver.theta, "solver");
    cfg.solver.tol = get_number_or(js, "tol", cfg.solver.tol, "solver");
    if (js.contains("max_iter")) cfg.solver.max_iter = get_int(js, "max_iter", "solver");
  }
  if (!(cfg.solver.theta > 0.0 && cfg.solver.theta <= 1.0))
    throw ConfigError("solver.theta: must be in (0, 1]");
  if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol: must be positive");
  if (cfg.solver.max_iter < 1) throw ConfigError("solver.max_iter: must be at least 1");

  if (j.contains("particles")) {
    const json& jq = j["particles"];
    check_keys(jq, {"N", "seeds"}, "particles");
    if (jq.contains("N")) cfg.particles.N = get_int(jq, "N", "particles");
    if (jq.contains("seeds")) {
      if (!jq["seeds"].is_array()) throw ConfigError("particles.seeds: must be an array");
      cfg.particles.seeds.clear();
      for (const auto& s : jq["seeds"])
        cfg.particles.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (cfg.particles.N < 1) throw ConfigError("particles.N: must be at least 1");
  if (cfg.particles.seeds.empty()) throw ConfigError("particles.seeds: must not be empty");

  if (j.contains("output")) {
    const json& jo = j["output"];
    check_keys(jo, {"directory", "snapshot_stride"}, "output");
    if (jo.contains("directory")) cfg.output.directory = jo["directory"].get<std::string>();
    if (jo.contains("snapshot_stride"))
      cfg.output.snapshot_stride = get_int(jo, "snapshot_stride", "output");
  }
  if (cfg.output.snapshot_stride < 1)
    throw ConfigError("output.snapshot_stride: must be at least 1");

  try {
    cfg.problem = make_problem(grid, mesh, w, std::move(coupling), std::move(rho0),
                               std::move(phiT), cfl_safety);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem construction failed: ") + e.what());
  }
  // the hash covers the scientific content; where outputs land is not part
  // of a run's identity
  json canon = j;
  canon.erase("output");
  cfg.canonical = canon.dump();
  return cfg;
}

void save_trajectory(const std::string& path, const ValueTrajectory& v) {
  save_snaps(path, v.mesh, v.snaps);
}

void save_trajectory(const std::string& path, const DensityTrajectory& v) {
  save_snaps(path, v.mesh, v.snaps);
}

ValueTrajectory load_value_trajectory(const std::string& path) {
  ValueTrajectory v;
  v.snaps = load_snaps(path, v.mesh);
  return v;
}

DensityTrajectory load_density_trajectory(const std::string& path) {
  DensityTrajectory r;
  r.snaps = load_snaps(path, r.mesh);
  // diagnostics recomputed from the snapshots; drift history is not stored
  for (int k = 0; k <= r.mesh.nt; ++k) {
    DensityStepDiagnostics d;
    d.t = r.mesh.time(k);
    d.mass = integrate(r.at(k));
    d.min_value = min_value(r.at(k));
    d.l2 = l2_norm(r.at(k));
    r.diag.push_back(d);
  }
  return r;
}

CostReport evaluate_cost(const ProblemSpec& spec, const SolutionPair& pair) {
  auto grads = trajectory_gradients(pair.Phi);
  std::vector<VectorField> control;
  control.reserve(grads.size());
  for (auto& gp : grads) {
    VectorField f(spec.grid);
    for (int a = 0; a < spec.grid.d; ++a) {
      f.comp[a] = gp.comp[a];
      for (double& v : f.comp[a].values) v = -v;
    }
    control.push_back(std::move(f));
  }
  CostReport rep;
  const double dt = spec.mesh.dt;
  for (int k = 0; k <= spec.mesh.nt; ++k) {
    ScalarField integrand = spec.coupling.running_cost(pair.rho.at(k));
    for (int a = 0; a < spec.grid.d; ++a)
      for (std::size_t i = 0; i < integrand.size(); ++i) {
        double f = control[k].comp[a].values[i];
        integrand.values[i] += 0.5 * f * f;
      }
    for (std::size_t i = 0; i < integrand.size(); ++i)
      integrand.values[i] *= pair.rho.at(k).values[i];
    double w = (k == 0 || k == spec.mesh.nt) ? 0.5 : 1.0;
    rep.running += w * dt * integrate(integrand);
  }
  ScalarField term = spec.phiT;
  for (std::size_t i = 0; i < term.size(); ++i)
    term.values[i] *= pair.rho.final().values[i];
  rep.terminal = integrate(term);
  rep.total = rep.running + rep.terminal;
  return rep;
}

ProbeReport optimality_probe(const ProblemSpec& spec, const SolutionPair& pair,
                             int n_perturb, double eps, std::uint64_t seed) {
  if (n_perturb < 1) throw std::invalid_argument("optimality_probe: need n_perturb >= 1");
  auto grads = trajectory_gradients(pair.Phi);
  ProbeReport rep;
  rep.base_cost = evaluate_cost(spec, pair).total;
  rep.min_delta_e = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  for (int j = 0; j < n_perturb; ++j) {
    VectorField delta = random_perturbation(spec.grid, rng);
    // control F = -grad Phi + eps * delta; the forward solver takes the
    // drift contribution -F
    std::vector<VectorField> control;
    control.reserve(grads.size());
    for (const auto& gp : grads) {
      VectorField f(spec.grid);
      for (int a = 0; a < spec.grid.d; ++a) {
        f.comp[a] = gp.comp[a];
        for (std::size_t i = 0; i < f.comp[a].size(); ++i) {
          f.comp[a].values[i] =
              -f.comp[a].values[i] + eps * delta.comp[a].values[i];
        }
      }
      control.push_back(std::move(f));
    }
    DensityTrajectory rho_pert = fp_solve_with_control(spec, [&](int k) {
      VectorField minus_f(spec.grid);
      for (int a = 0; a < spec.grid.d; ++a) {
        minus_f.comp[a] = control[k].comp[a];
        for (double& v : minus_f.comp[a].values) v = -v;
      }
      return minus_f;
    });
    double e_pert = cost_of(spec, rho_pert, control);
    PerturbationResult row;
    row.index = j;
    row.eps = eps;
    row.delta_e = e_pert - rep.base_cost;
    rep.min_delta_e = std::min(rep.min_delta_e, row.delta_e);
    rep.rows.push_back(row);
  }
  return rep;
}

namespace {

json budget_json(const LipschitzBudget& b) {
  return {{"A", b.A}, {"B", b.B}, {"C", b.C}, {"c0", b.c0}, {"T", b.T}};
}

json cost_json(const CostReport& c) {
  return {{"running", c.running},
          {"terminal", c.terminal},
          {"total", c.total},
          {"l_available", c.l_available}};
}

std::string timestamp_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

int run(const std::string& config_path) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path dir = resolve_output_dir(cfg.output);
  fs::create_directories(dir);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';

  json manifest;
  manifest["config_hash"] = hex64(fnv1a(cfg.canonical));
  manifest["theta"] = cfg.solver.theta;
  manifest["tol"] = cfg.solver.tol;
  manifest["max_iter"] = cfg.solver.max_iter;
  manifest["warnings"] = cfg.warnings;
  manifest["timestamp"] = timestamp_now();

  AssumptionReport assumptions = validate_assumptions(cfg.problem);
  write_json(dir / "assumptions.json", assumption_json(assumptions));
  if (!assumptions.all_pass()) {
    manifest["status"] = "assumptions_failed";
    write_json(dir / "manifest.json", manifest);
    std::cerr << "assumption validation failed; see "
              << (dir / "assumptions.json").string() << '\n';
    return kExitAssumptions;
  }

  LipschitzBudget budget = compute_budget(cfg.problem);
  manifest["budget"] = budget_json(budget);

  SolveResult res;
  try {
    res = solve(cfg.problem, cfg.solver.theta, cfg.solver.tol, cfg.solver.max_iter);
  } catch (const std::exception& e) {
    manifest["status"] = "solver_error";
    manifest["error"] = e.what();
    write_json(dir / "manifest.json", manifest);
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  write_iteration_log(dir / "iterations.csv", res.log);
  write_density_diagnostics(dir / "density_diagnostics.csv", res.pair.rho);
  save_trajectory((dir / "phi_trajectory.bin").string(), res.pair.Phi);
  save_trajectory((dir / "rho_trajectory.bin").string(), res.pair.rho);
  for (int k = 0; k <= cfg.problem.mesh.nt; k += cfg.output.snapshot_stride) {
    char name[64];
    std::snprintf(name, sizeof name, "rho_%05d.mfoc", k);
    write_field_binary((dir / name).string(), res.pair.rho.at(k));
    std::snprintf(name, sizeof name, "phi_%05d.mfoc", k);
    write_field_binary((dir / name).string(), res.pair.Phi.at(k));
  }
  write_field_csv((dir / "rho_final.csv").string(), res.pair.rho.final());
  write_field_csv((dir / "phi_initial.csv").string(), res.pair.Phi.at(0));

  manifest["iterations"] = res.pair.iterations;
  manifest["converged"] = res.pair.converged;
  manifest["final_residual"] = res.pair.final_residual;
  if (!res.pair.converged) {
    manifest["status"] = "not_converged";
    write_json(dir / "manifest.json", manifest);
    std::cerr << "fixed point did not converge within " << cfg.solver.max_iter
              << " iterations (residual " << res.pair.final_residual << ")\n";
    return kExitSolver;
  }

  CertificationReport cert = certify(cfg.problem, res.pair, budget, cfg.solver.tol);
  write_json(dir / "certification.json", certification_json(cert));

  CostReport cost = evaluate_cost(cfg.problem, res.pair);
  write_json(dir / "cost.json", cost_json(cost));
  manifest["cost"] = cost_json(cost);

  if (!cert.all_pass()) {
    manifest["status"] = "certification_failed";
    write_json(dir / "manifest.json", manifest);
    std::cerr << "certification failed; see " << (dir / "certification.json").string()
              << '\n';
    return kExitCertification;
  }
  manifest["status"] = "ok";
  write_json(dir / "manifest.json", manifest);
  std::cout << "run complete: " << dir.string() << '\n';
  return kExitOk;
}

int run_validate(const std::string& config_path) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  AssumptionReport rep = validate_assumptions(cfg.problem);
  std::cout << assumption_json(rep).dump(2) << '\n';
  return rep.all_pass() ? kExitOk : kExitAssumptions;
}

int run_particles(const std::string& config_path, const std::string& from_dir) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  SolutionPair pair;
  try {
    pair.Phi = load_value_trajectory((fs::path(from_dir) / "phi_trajectory.bin").string());
    pair.rho = load_density_trajectory((fs::path(from_dir) / "rho_trajectory.bin").string());
  } catch (const std::exception& e) {
    std::cerr << "cannot load run directory: " << e.what() << '\n';
    return kExitConfig;
  }
  pair.converged = true;
  const fs::path dir = fs::path(from_dir) / "particles";
  fs::create_directories(dir);

  json report;
  report["N"] = cfg.particles.N;
  report["mean_field"] = json::array();
  for (std::uint64_t seed : cfg.particles.seeds) {
    ParticleCloud cloud = simulate_mkv(cfg.problem, pair.Phi, cfg.particles.N, seed);
    double d1 = wasserstein1(cloud, pair.rho.final());
    report["mean_field"].push_back({{"seed", seed}, {"d1_final", d1}});
    char name[64];
    std::snprintf(name, sizeof name, "cloud_seed%llu.csv",
                  static_cast<unsigned long long>(seed));
    write_cloud_csv(dir / name, cloud);
    std::cout << "seed " << seed << ": d1(empirical(T), rho(T)) = " << d1 << '\n';
  }

  report["value_identity"] = json::array();
  const double probes[3] = {-0.25, 0.0, 0.25};
  for (double x : probes) {
    std::array<double, 3> x0{x, 0.0, 0.0};
    ValueIdentityReport vr = verify_value_identity(cfg.problem, pair, pair.Phi, x0, 0,
                                                   cfg.particles.N,
                                                   cfg.particles.seeds.front());
    report["value_identity"].push_back({{"x0", x},
                                        {"t0", vr.t0},
                                        {"estimate", vr.estimate},
                                        {"grid_value", vr.grid_value},
                                        {"residual", vr.residual},
                                        {"stderr", vr.stderr_zeta},
                                        {"terminal_term", vr.terminal_term},
                                        {"gradient_term", vr.gradient_term},
                                        {"nonlocal_term", vr.nonlocal_term},
                                        {"coupling_term", vr.coupling_term},
                                        {"gradient_energy_eta", vr.gradient_energy_eta},
                                        {"gradient_energy_budget", vr.gradient_energy_budget}});
    std::cout << "value identity at x0=" << x << ": residual " << vr.residual
              << " (stderr " << vr.stderr_zeta << ")\n";
  }
  write_json(dir / "particle_report.json", report);
  return kExitOk;
}

int run_probe(const std::string& config_path, const std::string& from_dir) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  SolutionPair pair;
  try {
    pair.Phi = load_value_trajectory((fs::path(from_dir) / "phi_trajectory.bin").string());
    pair.rho = load_density_trajectory((fs::path(from_dir) / "rho_trajectory.bin").string());
  } catch (const std::exception& e) {
    std::cerr << "cannot load run directory: " << e.what() << '\n';
    return kExitConfig;
  }
  pair.converged = true;

  json report;
  report["levels"] = json::array();
  const double eps_levels[3] = {0.2, 0.1, 0.05};
  for (double eps : eps_levels) {
    ProbeReport pr = optimality_probe(cfg.problem, pair, 10, eps, 2024);
    json rows = json::array();
    for (const auto& r : pr.rows) rows.push_back({{"index", r.index}, {"delta_e", r.delta_e}});
    report["base_cost"] = pr.base_cost;
    report["levels"].push_back(
        {{"eps", eps}, {"min_delta_e", pr.min_delta_e}, {"rows", rows}});
    std::cout << "eps=" << eps << ": min delta E = " << pr.min_delta_e << '\n';
  }
  write_json(fs::path(from_dir) / "probe.json", report);
  return kExitOk;
}

}  // namespace mfoc
