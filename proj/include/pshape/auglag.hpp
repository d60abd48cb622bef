#pragma once

#include "pshape/mesh.hpp"

namespace pshape {

/// Multipliers, penalties, targets and tolerances of the barycenter and
/// volume constraints.
struct AugLagState {
  Vec2 lambda_b = Vec2::Zero();
  double lambda_c = 0.0;
  double rho_b = 5e7;
  double rho_c = 1e2;
  double rho_inc = 2.0;
  double tau_b = 1e-6;
  double tau_c = 2e-2;
  Vec2 target_b = Vec2::Zero();
  double target_volume = 0.0;
  double step_size = 2e-3;
};

/// Throws std::invalid_argument when a field is out of range.
void check(const AugLagState& al);

/// b = barycenter - target.
Vec2 barycenter_residual(const Mesh& mesh, const AugLagState& al);
/// c = volume - target.
double volume_residual(const Mesh& mesh, const AugLagState& al);

}  // namespace pshape
