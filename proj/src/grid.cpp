#include "mfoc/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>

namespace mfoc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// FFTW planning is not thread-safe; execution of independent plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Complex work buffer plus c2c plans for one grid shape.
class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(const TorusGrid& g) : grid_(g) {
    const std::size_t sz = g.size();
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * sz));
    int dims[3] = {g.n, g.n, g.n};
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft(g.d, dims, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(g.d, dims, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~SpectralWorkspace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  void load(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      buf_[i][0] = v[i];
      buf_[i][1] = 0.0;
    }
  }

  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

  /// Real part scaled by 1/size, i.e. the inverse-transform normalization.
  void store(std::vector<double>& v) const {
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = buf_[i][0] * scale;
  }

  std::complex<double> at(std::size_t i) const {
    return {buf_[i][0], buf_[i][1]};
  }
  void set(std::size_t i, std::complex<double> z) {
    buf_[i][0] = z.real();
    buf_[i][1] = z.imag();
  }

  const TorusGrid& grid() const { return grid_; }

 private:
  TorusGrid grid_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Signed integer wavenumber for FFT bin j on an n-point axis.
int wavenumber(int j, int n) { return j <= n / 2 ? j : j - n; }

/// Apply fn(coef, k_vec) to every spectral coefficient in place.
template <typename Fn>
void for_each_mode(SpectralWorkspace& ws, Fn&& fn) {
  const TorusGrid& g = ws.grid();
  const std::size_t sz = g.size();
  for (std::size_t i = 0; i < sz; ++i) {
    std::array<int, 3> k{0, 0, 0};
    std::size_t rest = i;
    for (int a = g.d - 1; a >= 0; --a) {
      k[a] = wavenumber(static_cast<int>(rest % g.n), g.n);
      rest /= g.n;
    }
    ws.set(i, fn(ws.at(i), k));
  }
}

}  // namespace

TorusGrid::TorusGrid(int dim, int points_per_axis) : d(dim), n(points_per_axis) {
  if (d < 1 || d > 3)
    throw std::invalid_argument("TorusGrid: dimension must be in [1, 3], got " +
                                std::to_string(d));
  if (!is_power_of_two(n))
    throw std::invalid_argument("TorusGrid: points per axis must be a power of two, got " +
                                std::to_string(n));
  h = 1.0 / n;
}

std::array<int, 3> TorusGrid::unravel(std::size_t flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = d - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

std::size_t TorusGrid::ravel(const std::array<int, 3>& idx) const {
  std::size_t flat = 0;
  for (int a = 0; a < d; ++a) {
    int i = idx[a] % n;
    if (i < 0) i += n;
    flat = flat * n + static_cast<std::size_t>(i);
  }
  return flat;
}

TimeMesh::TimeMesh(double horizon, int steps) : T(horizon), nt(steps) {
  if (!(T > 0.0)) throw std::invalid_argument("TimeMesh: horizon must be positive");
  if (nt < 1) throw std::invalid_argument("TimeMesh: need at least one step");
  dt = T / nt;
}

ScalarField ScalarField::from_function(
    const TorusGrid& g, const std::function<double(const std::array<double, 3>&)>& fn) {
  ScalarField f(g);
  const std::size_t sz = g.size();
  for (std::size_t i = 0; i < sz; ++i) {
    auto idx = g.unravel(i);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < g.d; ++a) x[a] = g.coord(idx[a]);
    f.values[i] = fn(x);
  }
  return f;
}

bool all_finite(const ScalarField& f) {
  for (double v : f.values)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const ScalarField& f, const std::string& what) {
  if (!all_finite(f))
    throw std::invalid_argument(what + ": field contains non-finite values");
}

void require_same_grid(const TorusGrid& a, const TorusGrid& b, const std::string& what) {
  if (a != b)
    throw std::invalid_argument(what + ": grid mismatch (d=" + std::to_string(a.d) +
                                ",n=" + std::to_string(a.n) + " vs d=" + std::to_string(b.d) +
                                ",n=" + std::to_string(b.n) + ")");
}

VectorField gradient(const ScalarField& f) {
  require_finite(f, "gradient");
  const TorusGrid& g = f.grid;
  VectorField out(g);
  SpectralWorkspace ws(g);
  for (int axis = 0; axis < g.d; ++axis) {
    ws.load(f.values);
    ws.forward();
    for_each_mode(ws, [&](std::complex<double> c, const std::array<int, 3>& k) {
      // Nyquist mode has no well-defined odd derivative; drop it.
      if (k[axis] == g.n / 2) return std::complex<double>(0.0, 0.0);
      return c * std::complex<double>(0.0, kTwoPi * k[axis]);
    });
    ws.backward();
    ws.store(out.comp[axis].values);
  }
  return out;
}

VectorField fd_gradient(const ScalarField& f) {
  require_finite(f, "fd_gradient");
  const TorusGrid& g = f.grid;
  VectorField out(g);
  const std::size_t sz = g.size();
  for (int axis = 0; axis < g.d; ++axis) {
    for (std::size_t i = 0; i < sz; ++i) {
      auto idx = g.unravel(i);
      auto ip = idx, im = idx;
      ip[axis] = (idx[axis] + 1) % g.n;
      im[axis] = (idx[axis] + g.n - 1) % g.n;
      out.comp[axis].values[i] =
          (f.values[g.ravel(ip)] - f.values[g.ravel(im)]) / (2.0 * g.h);
    }
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  if (v.comp.empty()) throw std::invalid_argument("divergence: empty vector field");
  const TorusGrid& g = v.grid;
  for (const auto& c : v.comp) require_same_grid(g, c.grid, "divergence");
  ScalarField out(g);
  SpectralWorkspace ws(g);
  for (int axis = 0; axis < g.d; ++axis) {
    require_finite(v.comp[axis], "divergence");
    ws.load(v.comp[axis].values);
    ws.forward();
    for_each_mode(ws, [&](std::complex<double> c, const std::array<int, 3>& k) {
      if (k[axis] == g.n / 2) return std::complex<double>(0.0, 0.0);
      return c * std::complex<double>(0.0, kTwoPi * k[axis]);
    });
    ws.backward();
    std::vector<double> part(g.size());
    ws.store(part);
    for (std::size_t i = 0; i < part.size(); ++i) out.values[i] += part[i];
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  require_finite(f, "laplacian");
  const TorusGrid& g = f.grid;
  ScalarField out(g);
  SpectralWorkspace ws(g);
  ws.load(f.values);
  ws.forward();
  for_each_mode(ws, [&](std::complex<double> c, const std::array<int, 3>& k) {
    double k2 = 0.0;
    for (int a = 0; a < g.d; ++a) k2 += static_cast<double>(k[a]) * k[a];
    return c * (-kTwoPi * kTwoPi * k2);
  });
  ws.backward();
  ws.store(out.values);
  return out;
}

ScalarField convolve(const ScalarField& kernel, const ScalarField& f) {
  require_same_grid(kernel.grid, f.grid, "convolve");
  require_finite(kernel, "convolve");
  require_finite(f, "convolve");
  const TorusGrid& g = f.grid;
  const std::size_t sz = g.size();

  // The kernel is sampled at nodes x_l = -1/2 + l*h, but circular convolution
  // indexes it by displacement m*h; rotating every axis by n/2 aligns the two.
  std::vector<double> rotated(sz);
  for (std::size_t i = 0; i < sz; ++i) {
    auto idx = g.unravel(i);
    std::array<int, 3> shifted = idx;
    for (int a = 0; a < g.d; ++a) shifted[a] = (idx[a] + g.n / 2) % g.n;
    rotated[i] = kernel.values[g.ravel(shifted)];
  }

  SpectralWorkspace wk(g), wf(g);
  wk.load(rotated);
  wk.forward();
  wf.load(f.values);
  wf.forward();
  double hd = 1.0;
  for (int a = 0; a < g.d; ++a) hd *= g.h;
  for (std::size_t i = 0; i < sz; ++i) wf.set(i, wf.at(i) * wk.at(i) * hd);
  wf.backward();
  ScalarField out(g);
  wf.store(out.values);
  return out;
}

double integrate(const ScalarField& f) {
  double hd = 1.0;
  for (int a = 0; a < f.grid.d; ++a) hd *= f.grid.h;
  double s = 0.0;
  for (double v : f.values) s += v;
  return hd * s;
}

ScalarField heat_semigroup(const ScalarField& f, double t) {
  require_finite(f, "heat_semigroup");
  if (t < 0.0) throw std::invalid_argument("heat_semigroup: negative time");
  const TorusGrid& g = f.grid;
  ScalarField out(g);
  SpectralWorkspace ws(g);
  ws.load(f.values);
  ws.forward();
  for_each_mode(ws, [&](std::complex<double> c, const std::array<int, 3>& k) {
    double k2 = 0.0;
    for (int a = 0; a < g.d; ++a) k2 += static_cast<double>(k[a]) * k[a];
    return c * std::exp(-kTwoPi * kTwoPi * k2 * t);
  });
  ws.backward();
  ws.store(out.values);
  return out;
}

ScalarField mollify(const ScalarField& f, double eps) {
  if (eps <= 0.0) return f;
  return heat_semigroup(f, 0.5 * eps * eps);
}

double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

double min_value(const ScalarField& f) {
  double m = f.values.empty() ? 0.0 : f.values[0];
  for (double v : f.values) m = std::min(m, v);
  return m;
}

double l2_norm(const ScalarField& f) {
  double hd = 1.0;
  for (int a = 0; a < f.grid.d; ++a) hd *= f.grid.h;
  double s = 0.0;
  for (double v : f.values) s += v * v;
  return std::sqrt(hd * s);
}

double l2_norm_spectral(const ScalarField& f) {
  const TorusGrid& g = f.grid;
  SpectralWorkspace ws(g);
  ws.load(f.values);
  ws.forward();
  const std::size_t sz = g.size();
  double s = 0.0;
  for (std::size_t i = 0; i < sz; ++i) s += std::norm(ws.at(i));
  // Parseval with the unnormalized forward transform: ||f||^2 = sum|F|^2 / n^(2d) * 1.
  return std::sqrt(s) / static_cast<double>(sz);
}

double sup_norm(const VectorField& v) {
  if (v.comp.empty()) return 0.0;
  const std::size_t sz = v.comp[0].size();
  double m = 0.0;
  for (std::size_t i = 0; i < sz; ++i) {
    double s = 0.0;
    for (const auto& c : v.comp) s += c.values[i] * c.values[i];
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "operator+");
  ScalarField out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
  return out;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "operator-");
  ScalarField out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

ScalarField operator*(double s, const ScalarField& a) {
  ScalarField out = a;
  for (double& v : out.values) v *= s;
  return out;
}

void axpy(double s, const ScalarField& x, ScalarField& y) {
  require_same_grid(x.grid, y.grid, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] += s * x.values[i];
}

}  // namespace mfoc
