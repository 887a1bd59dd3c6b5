#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfoc {

/// Uniform periodic grid on the cube [-1/2, 1/2)^d identified with the flat
/// torus. n points per axis (power of two), spacing h = 1/n, node coordinates
/// x_i = -1/2 + i*h.
struct TorusGrid {
  int d = 1;
  int n = 0;
  double h = 0.0;

  TorusGrid() = default;
  TorusGrid(int dim, int points_per_axis);

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(n);
    return s;
  }

  double coord(int axis_index) const { return -0.5 + axis_index * h; }

  /// Decompose a flat row-major index into per-axis indices.
  std::array<int, 3> unravel(std::size_t flat) const;
  std::size_t ravel(const std::array<int, 3>& idx) const;

  bool operator==(const TorusGrid& o) const {
    return d == o.d && n == o.n;
  }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

/// Uniform time mesh on [0, T] with nt steps, node times t_k = k*dt.
struct TimeMesh {
  double T = 0.0;
  int nt = 0;
  double dt = 0.0;

  TimeMesh() = default;
  TimeMesh(double horizon, int steps);

  double time(int k) const { return k * dt; }

  bool operator==(const TimeMesh& o) const { return T == o.T && nt == o.nt; }
  bool operator!=(const TimeMesh& o) const { return !(*this == o); }
};

/// Real-valued nodal field on a TorusGrid, row-major over axes.
struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const TorusGrid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  /// Sample fn(x) at the grid nodes; fn receives d coordinates (unused
  /// trailing entries are zero).
  static ScalarField from_function(
      const TorusGrid& g, const std::function<double(const std::array<double, 3>&)>& fn);

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

/// d ScalarField components sharing one grid.
struct VectorField {
  TorusGrid grid;
  std::vector<ScalarField> comp;

  VectorField() = default;
  explicit VectorField(const TorusGrid& g) : grid(g) {
    comp.reserve(g.d);
    for (int a = 0; a < g.d; ++a) comp.emplace_back(g);
  }
};

// ---- calculus on fields (spectral unless noted) ----

/// Spectral gradient; exact for band-limited fields. Throws on non-finite
/// input.
VectorField gradient(const ScalarField& f);

/// Second-order central-difference gradient, kept as a cross-check for the
/// spectral path.
VectorField fd_gradient(const ScalarField& f);

/// Spectral divergence. Throws on mismatched component grids.
ScalarField divergence(const VectorField& v);

/// Spectral Laplacian.
ScalarField laplacian(const ScalarField& f);

/// Periodic convolution scaled by h^d, approximating
/// (k * f)(x) = \int_{Q^d} k(x - y) f(y) dy with both factors sampled on the
/// same grid. Commutes exactly in its arguments.
ScalarField convolve(const ScalarField& kernel, const ScalarField& f);

/// h^d * sum of nodal values (exact trapezoid/midpoint rule on a uniform
/// periodic grid).
double integrate(const ScalarField& f);

/// Exact heat semigroup: multiply each Fourier coefficient by
/// exp(-4 pi^2 |k|^2 t).
ScalarField heat_semigroup(const ScalarField& f, double t);

/// Gaussian spectral mollifier of width eps (heat semigroup at time eps^2/2).
ScalarField mollify(const ScalarField& f, double eps);

double sup_norm(const ScalarField& f);
double min_value(const ScalarField& f);
double l2_norm(const ScalarField& f);  // sqrt(h^d * sum f^2)
/// L2 norm evaluated from the Fourier coefficients (Parseval route).
double l2_norm_spectral(const ScalarField& f);

/// Nodal max of the Euclidean length |v(x)|.
double sup_norm(const VectorField& v);

bool all_finite(const ScalarField& f);
void require_finite(const ScalarField& f, const std::string& what);
void require_same_grid(const TorusGrid& a, const TorusGrid& b, const std::string& what);

// arithmetic helpers
ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& a);
void axpy(double s, const ScalarField& x, ScalarField& y);  // y += s*x

}  // namespace mfoc
