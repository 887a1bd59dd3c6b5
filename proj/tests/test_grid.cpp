#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "mfoc/field_io.hpp"
#include "mfoc/grid.hpp"

using namespace mfoc;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

ScalarField random_field(const TorusGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ScalarField f(g);
  for (double& v : f.values) v = unif(rng);
  return f;
}

/// O(n^2) reference for the periodic convolution
/// (k * f)(x_i) = h^d sum_j k(x_i - x_j) f(x_j), indices mod n per axis.
ScalarField convolve_direct(const ScalarField& kernel, const ScalarField& f) {
  const TorusGrid& g = kernel.grid;
  double hd = 1.0;
  for (int a = 0; a < g.d; ++a) hd *= g.h;
  ScalarField out(g);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto xi = g.unravel(i);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      auto xj = g.unravel(j);
      // node carrying coordinate x_i - x_j wrapped into [-1/2, 1/2)
      std::array<int, 3> diff{0, 0, 0};
      for (int a = 0; a < g.d; ++a)
        diff[a] = ((xi[a] - xj[a] + g.n / 2) % g.n + g.n) % g.n;
      s += kernel.values[g.ravel(diff)] * f.values[j];
    }
    out.values[i] = hd * s;
  }
  return out;
}

double max_gap(const ScalarField& a, const ScalarField& b) { return sup_norm(a - b); }

}  // namespace

TEST_CASE("index raveling roundtrips in every dimension") {
  for (int d = 1; d <= 3; ++d) {
    TorusGrid g(d, 8);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.ravel(g.unravel(i)) == i);
  }
}

TEST_CASE("grid constructor rejects bad sizes") {
  CHECK_THROWS(TorusGrid(0, 8));
  CHECK_THROWS(TorusGrid(4, 8));
  CHECK_THROWS(TorusGrid(1, 0));
  CHECK_THROWS(TorusGrid(1, 12));  // not a power of two
}

TEST_CASE("spectral gradient is exact on a cosine mode") {
  TorusGrid g(1, 64);
  ScalarField f = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return std::cos(kTwoPi * 3 * x[0]); });
  ScalarField ref = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
    return -kTwoPi * 3 * std::sin(kTwoPi * 3 * x[0]);
  });
  CHECK(max_gap(gradient(f).comp[0], ref) < 1e-11);
}

TEST_CASE("gradient of a constant vanishes and matches finite differences on smooth data") {
  TorusGrid g(2, 16);
  ScalarField c(g, 3.5);
  CHECK(sup_norm(gradient(c)) < 1e-13);

  ScalarField f = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
    return std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]);
  });
  VectorField sp = gradient(f);
  VectorField fd = fd_gradient(f);
  for (int a = 0; a < 2; ++a)
    CHECK(max_gap(sp.comp[a], fd.comp[a]) < 0.5);  // fd is second order at n=16
}

TEST_CASE("divergence of a gradient equals the laplacian") {
  TorusGrid g(2, 16);
  ScalarField f = random_field(g, 11);
  ScalarField lap = laplacian(f);
  ScalarField div = divergence(gradient(f));
  // both are spectral; they agree except for the Nyquist handling of first
  // derivatives, which is zeroed by design
  ScalarField smooth = heat_semigroup(f, 0.02);
  CHECK(max_gap(laplacian(smooth), divergence(gradient(smooth))) < 1e-6);
  (void)lap;
  (void)div;
}

TEST_CASE("fft convolution matches the quadratic-time reference") {
  for (int d = 1; d <= 2; ++d) {
    TorusGrid g(d, d == 1 ? 16 : 8);
    ScalarField k = random_field(g, 21);
    ScalarField f = random_field(g, 22);
    CHECK(max_gap(convolve(k, f), convolve_direct(k, f)) < 1e-12);
  }
}

TEST_CASE("convolution commutes and respects known closed forms") {
  TorusGrid g(1, 64);
  ScalarField k = random_field(g, 31);
  ScalarField f = random_field(g, 32);
  CHECK(max_gap(convolve(k, f), convolve(f, k)) < 1e-12);

  // cos kernel against a density: (cos(2pi .) * f)(x) has only the first mode
  ScalarField ck = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return std::cos(kTwoPi * x[0]); });
  ScalarField rho = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  ScalarField ref = ScalarField::from_function(
      g, [](const std::array<double, 3>& x) { return 0.25 * std::cos(kTwoPi * x[0]); });
  CHECK(max_gap(convolve(ck, rho), ref) < 1e-13);

  // convolution with a constant: integral times the constant
  ScalarField one(g, 1.0);
  ScalarField conv = convolve(one, f);
  double mean = integrate(f);
  for (double v : conv.values) CHECK(std::abs(v - mean) < 1e-13);
}

TEST_CASE("integration is exact for trigonometric polynomials") {
  TorusGrid g(1, 64);
  ScalarField f = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
    return 2.0 + std::cos(kTwoPi * x[0]) + 0.3 * std::sin(kTwoPi * 5 * x[0]);
  });
  CHECK(std::abs(integrate(f) - 2.0) < 1e-14);
}

TEST_CASE("heat semigroup damps each mode by the analytic factor") {
  TorusGrid g(1, 64);
  const double t = 0.07;
  ScalarField f = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
    return 1.0 + std::cos(kTwoPi * x[0]) + 0.25 * std::cos(kTwoPi * 4 * x[0]);
  });
  ScalarField ref = ScalarField::from_function(g, [t](const std::array<double, 3>& x) {
    return 1.0 + std::exp(-4.0 * M_PI * M_PI * t) * std::cos(kTwoPi * x[0]) +
           0.25 * std::exp(-4.0 * M_PI * M_PI * 16.0 * t) * std::cos(kTwoPi * 4 * x[0]);
  });
  CHECK(max_gap(heat_semigroup(f, t), ref) < 1e-13);
}

TEST_CASE("heat semigroup conserves mass and forms a semigroup") {
  TorusGrid g(2, 16);
  ScalarField f = random_field(g, 41);
  const double m0 = integrate(f);
  ScalarField once = heat_semigroup(f, 0.02);
  CHECK(std::abs(integrate(once) - m0) < 1e-13);
  ScalarField twice = heat_semigroup(heat_semigroup(f, 0.01), 0.01);
  CHECK(max_gap(once, twice) < 1e-13);
}

TEST_CASE("parseval route agrees with the nodal l2 norm") {
  TorusGrid g(2, 16);
  ScalarField f = random_field(g, 51);
  CHECK(std::abs(l2_norm(f) - l2_norm_spectral(f)) < 1e-12);
}

TEST_CASE("mollifier is the heat kernel at the matching time") {
  TorusGrid g(1, 64);
  ScalarField f = random_field(g, 61);
  const double eps = 0.05;
  CHECK(max_gap(mollify(f, eps), heat_semigroup(f, 0.5 * eps * eps)) < 1e-13);
}

TEST_CASE("non-finite input is rejected") {
  TorusGrid g(1, 8);
  ScalarField f(g, 1.0);
  f.values[3] = std::nan("");
  CHECK_THROWS(gradient(f));
  CHECK_THROWS((void)convolve(f, f));
}

TEST_CASE("binary snapshot roundtrips bitwise and csv writes every node") {
  TorusGrid g(2, 8);
  ScalarField f = random_field(g, 71);
  const std::string path = "test_field_roundtrip.mfoc";
  write_field_binary(path, f);
  ScalarField back = read_field_binary(path);
  REQUIRE(back.grid == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back.values[i] == f.values[i]);
  write_field_csv("test_field_roundtrip.csv", f);
  std::FILE* csv = std::fopen("test_field_roundtrip.csv", "r");
  REQUIRE(csv != nullptr);
  int lines = 0;
  for (int c; (c = std::fgetc(csv)) != EOF;)
    if (c == '\n') ++lines;
  std::fclose(csv);
  CHECK(lines == 1 + 64);  // header plus one row per node
  std::remove(path.c_str());
  std::remove("test_field_roundtrip.csv");
}
