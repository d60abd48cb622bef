#include "pshape/sensitivity.hpp"

namespace pshape {

std::vector<Vec2> flow_shape_gradient(const Mesh& mesh, const FlowState& primal,
                                      const AdjointState& adj, const FluidProperties& props) {
  const auto layout = fem::build_p2_layout(mesh);
  const double mu = props.viscosity, rho = props.density;
  std::vector<Vec2> grad(mesh.node_count(), Vec2::Zero());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& tri = mesh.triangles[c];
    const auto geom = fem::cell_geometry(mesh, c);
    const auto& nodes = layout.cell_nodes[c];
    std::array<Vec2, 3> local{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
    for (const auto& q : fem::triangle_rule()) {
      const double w = q.weight * geom.area;
      const auto basis = fem::p2_basis(geom, q.bary);
      const Mat2 G = fem::p2_gradient(basis, nodes, primal.velocity);
      const Mat2 Gh = fem::p2_gradient(basis, nodes, adj.velocity);
      const Vec2 v = fem::p2_value(basis, nodes, primal.velocity);
      const Vec2 vh = fem::p2_value(basis, nodes, adj.velocity);
      const double p = fem::p1_value(tri, primal.pressure, q.bary);
      const double ph = fem::p1_value(tri, adj.pressure, q.bary);
      const Mat2 S = mu * (G + G.transpose());
      const double f = (S.cwiseProduct(Gh)).sum() + rho * (G * v).dot(vh) - p * Gh.trace() - ph * G.trace();
      for (int j = 0; j < 3; ++j) {
        const Vec2& gl = geom.grad_bary[j];
        for (int d = 0; d < 2; ++d) {
          // moving vertex j along e_d: grad u -> grad u - (grad u e_d) gl^T
          const Mat2 dG = -G.col(d) * gl.transpose();
          const Mat2 dGh = -Gh.col(d) * gl.transpose();
          const double df = mu * ((dG + dG.transpose()).cwiseProduct(Gh)).sum() + (S.cwiseProduct(dGh)).sum() +
                            rho * (dG * v).dot(vh) - p * dGh.trace() - ph * dG.trace();
          local[j](d) += w * (f * gl(d) + df);
        }
      }
    }
    for (int j = 0; j < 3; ++j) grad[tri[j]] += local[j];
  }
  return grad;
}

std::vector<double> normal_derivative_term(const Mesh& mesh, const FlowState& primal,
                                           const AdjointState& adj, const FluidProperties& props) {
  const auto layout = fem::build_p2_layout(mesh);
  std::vector<double> term(mesh.node_count(), 0.0), mass(mesh.node_count(), 0.0);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::Design) continue;
    const int cell = layout.boundary_edge_cell[e];
    const auto geom = fem::cell_geometry(mesh, cell);
    const auto& nodes = layout.cell_nodes[cell];
    const Vec2 n = edge_normal(mesh, be);
    const double len = edge_length(mesh, be);
    for (const auto& q : fem::line_rule()) {
      const auto basis = fem::p2_basis(geom, fem::edge_point(layout.boundary_edge_local[e], q.s));
      const Vec2 dv = fem::p2_gradient(basis, nodes, primal.velocity) * n;
      const Vec2 dvh = fem::p2_gradient(basis, nodes, adj.velocity) * n;
      const double f = -props.viscosity * dvh.dot(dv);
      term[be.nodes[0]] += q.weight * len * f * (1.0 - q.s);
      term[be.nodes[1]] += q.weight * len * f * q.s;
    }
    mass[be.nodes[0]] += 0.5 * len;
    mass[be.nodes[1]] += 0.5 * len;
  }
  for (std::size_t i = 0; i < term.size(); ++i)
    if (mass[i] > 0.0) term[i] /= mass[i];
  return term;
}

SensitivityField shape_sensitivity(const Mesh& mesh, const FlowState& primal,
                                   const AdjointState& adj, const FluidProperties& props,
                                   const AugLagState& al) {
  SensitivityField out;
  out.nodes = design_nodes(mesh);
  out.gamma.assign(mesh.node_count(), 0.0);

  const auto grad = flow_shape_gradient(mesh, primal, adj, props);
  const auto normals = design_normals(mesh);
  std::vector<double> share(mesh.node_count(), 0.0);
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::Design) continue;
    const Vec2 n = edge_normal(mesh, be);
    const double half = 0.5 * edge_length(mesh, be);
    for (int i : be.nodes) share[i] += half * normals[i].dot(n);
  }

  const double vol = volume(mesh);
  const Vec2 beta = barycenter(mesh);
  const Vec2 b = beta - al.target_b;
  const double c = vol - al.target_volume;
  for (int i : out.nodes) {
    const Vec2 r = mesh.nodes[i] - beta;
    out.gamma[i] = grad[i].dot(normals[i]) / share[i] + al.lambda_b.dot(r) / vol + al.lambda_c +
                   al.rho_b * b.dot(r) / vol + al.rho_c * c;
  }
  return out;
}

double shape_derivative(const Mesh& mesh, const SensitivityField& gamma, const DeformationField& u) {
  double sum = 0.0;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::Design) continue;
    const Vec2 n = edge_normal(mesh, be);
    const int a = be.nodes[0], b = be.nodes[1];
    sum += 0.5 * edge_length(mesh, be) * (gamma.gamma[a] * u.u[a].dot(n) + gamma.gamma[b] * u.u[b].dot(n));
  }
  return sum;
}

}  // namespace pshape
