#pragma once

#include <vector>

#include "pshape/flow.hpp"

namespace pshape {

/// Adjoint velocity on the P2 nodes, adjoint pressure on the vertices.
struct AdjointState {
  std::vector<Vec2> velocity;
  std::vector<double> pressure;
  double residual_norm = 0.0;
};

/// Linear adjoint solve around the frozen primal state. Design nodes carry
/// -v_inf/|v_inf|, inflow nodes zero, slip nodes a zero normal component;
/// the outflow condition is natural. Throws SolverError when the primal
/// state is not converged to cfg.nonlinear_tolerance or does not fit the mesh.
AdjointState solve_adjoint(const Mesh& mesh, const FlowState& primal, const FluidProperties& props,
                           const SolverConfig& cfg);

/// lambda = ph n - mu (grad vh + grad vh^T) n at Design nodes, indexed by mesh
/// node (zero elsewhere). The stress is averaged over the cells around each node.
std::vector<Vec2> boundary_traction_multiplier(const Mesh& mesh, const AdjointState& adj,
                                               const FluidProperties& props);

}  // namespace pshape
