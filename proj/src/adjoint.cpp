#include "pshape/adjoint.hpp"

#include <string>

namespace pshape {

AdjointState solve_adjoint(const Mesh& mesh, const FlowState& primal, const FluidProperties& props,
                           const SolverConfig& cfg) {
  check(props);
  check(cfg);
  MixedLayout layout{fem::build_p2_layout(mesh)};
  if (static_cast<int>(primal.velocity.size()) != layout.velocity_nodes() ||
      static_cast<int>(primal.pressure.size()) != layout.pressure_nodes())
    throw SolverError("primal state does not match the mesh");
  if (!(primal.residual_norm <= cfg.nonlinear_tolerance))
    throw SolverError("primal not converged, residual " + std::to_string(primal.residual_norm),
                      primal.residual_norm);

  const Vec2 e = props.inflow.normalized();
  const auto bc = fem::velocity_constraints(mesh, layout.p2, -e, Vec2::Zero());
  const auto sys = constrained_system(
      mixed_triplets(mesh, layout, props, MixedOperator::Adjoint, primal.velocity), layout, bc);
  const Eigen::VectorXd x = solve_linear(sys, cfg);

  AdjointState adj;
  unpack(layout, x, adj.velocity, adj.pressure);
  adj.residual_norm = (sys.matrix * x - sys.rhs).norm() / std::max(sys.rhs.norm(), 1e-300);
  return adj;
}

std::vector<Vec2> boundary_traction_multiplier(const Mesh& mesh, const AdjointState& adj,
                                               const FluidProperties& props) {
  const auto layout = fem::build_p2_layout(mesh);
  const auto normals = design_normals(mesh);
  const auto nodes = design_nodes(mesh);
  std::vector<char> on_design(mesh.node_count(), 0);
  for (int i : nodes) on_design[i] = 1;

  std::vector<Mat2> stress(mesh.node_count(), Mat2::Zero());
  std::vector<int> count(mesh.node_count(), 0);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    const auto geom = fem::cell_geometry(mesh, c);
    for (int k = 0; k < 3; ++k) {
      if (!on_design[t[k]]) continue;
      std::array<double, 3> bary{0.0, 0.0, 0.0};
      bary[k] = 1.0;
      const Mat2 g = fem::p2_gradient(fem::p2_basis(geom, bary), layout.cell_nodes[c], adj.velocity);
      stress[t[k]] += props.viscosity * (g + g.transpose());
      ++count[t[k]];
    }
  }
  std::vector<Vec2> lambda(mesh.node_count(), Vec2::Zero());
  for (int i : nodes) {
    const Vec2& n = normals[i];
    lambda[i] = adj.pressure[i] * n - (stress[i] / count[i]) * n;
  }
  return lambda;
}

}  // namespace pshape
