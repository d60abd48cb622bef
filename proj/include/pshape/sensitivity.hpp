#pragma once

#include <vector>

#include "pshape/adjoint.hpp"
#include "pshape/auglag.hpp"
#include "pshape/flow.hpp"

namespace pshape {

/// Boundary sensitivity. gamma is indexed by mesh node and zero off the
/// Design boundary; `nodes` lists the Design nodes.
struct SensitivityField {
  std::vector<double> gamma;
  std::vector<int> nodes;
};

/// Per-node displacement (or descent direction) on the mesh vertices.
struct DeformationField {
  std::vector<Vec2> u;
};

/// Derivative of the drag with respect to each vertex position: the volume
/// form of the Lagrangian R(v, p; vh, ph) differentiated cell by cell with
/// nodal field values held fixed. Indexed by mesh node.
std::vector<Vec2> flow_shape_gradient(const Mesh& mesh, const FlowState& primal,
                                      const AdjointState& adj, const FluidProperties& props);

/// Flow term -mu dvh/dn . dv/dn integrated along the Design edges from the
/// cell gradients and lumped to the nodes. Indexed by mesh node.
std::vector<double> normal_derivative_term(const Mesh& mesh, const FlowState& primal,
                                           const AdjointState& adj, const FluidProperties& props);

/// gamma = flow term + lambda_b.(x - beta)/V + lambda_c
///         + rho_b (beta - target_b).(x - beta)/V + rho_c (V - target_volume)
/// The flow term is the Design-normal part of flow_shape_gradient divided by
/// the node's share of boundary length, so that shape_derivative reproduces
/// the discrete drag derivative for node-normal displacements.
SensitivityField shape_sensitivity(const Mesh& mesh, const FlowState& primal,
                                   const AdjointState& adj, const FluidProperties& props,
                                   const AugLagState& al);

/// Trapezoidal quadrature of gamma u.n over the Design edges, with the edge
/// normal on each edge.
double shape_derivative(const Mesh& mesh, const SensitivityField& gamma, const DeformationField& u);

}  // namespace pshape
