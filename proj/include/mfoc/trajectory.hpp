#pragma once

#include <vector>

#include "mfoc/grid.hpp"

namespace mfoc {

/// Per-node diagnostics recorded while marching the density forward.
struct DensityStepDiagnostics {
  double t = 0.0;
  double mass = 0.0;
  double min_value = 0.0;
  double l2 = 0.0;
  double drift_sup = 0.0;  // sup|b| used to reach this node (0 at t=0)
};

/// Density rho(., t_k) at every time node, with per-step diagnostics.
struct DensityTrajectory {
  TimeMesh mesh;
  std::vector<ScalarField> snaps;
  std::vector<DensityStepDiagnostics> diag;

  const ScalarField& at(int k) const { return snaps.at(k); }
  const ScalarField& final() const { return snaps.back(); }
  double max_drift_sup() const {
    double m = 0.0;
    for (const auto& d : diag) m = std::max(m, d.drift_sup);
    return m;
  }
};

/// Value function snapshots on the same mesh; the terminal snapshot is the
/// given terminal datum, copied rather than solved.
struct ValueTrajectory {
  TimeMesh mesh;
  std::vector<ScalarField> snaps;

  const ScalarField& at(int k) const { return snaps.at(k); }

  /// Constant-in-time extension of a single field.
  static ValueTrajectory constant_in_time(const TimeMesh& mesh, const ScalarField& f) {
    ValueTrajectory v;
    v.mesh = mesh;
    v.snaps.assign(static_cast<std::size_t>(mesh.nt) + 1, f);
    return v;
  }
};

/// Spectral gradients of every snapshot.
std::vector<VectorField> trajectory_gradients(const ValueTrajectory& v);

double sup_gap(const ValueTrajectory& a, const ValueTrajectory& b);

}  // namespace mfoc
