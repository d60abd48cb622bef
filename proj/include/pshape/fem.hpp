#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "pshape/mesh.hpp"

namespace pshape::fem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Quadratic Lagrange node numbering: mesh vertices first, then one node per
/// mesh edge. Local order within a cell is v0, v1, v2, (v0,v1), (v1,v2), (v2,v0).
struct P2Layout {
  int vertex_count = 0;
  int edge_count = 0;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 6>> cell_nodes;
  std::vector<int> boundary_edge_node;  // per mesh boundary edge: its midpoint node
  std::vector<int> boundary_edge_cell;  // per mesh boundary edge: owning cell
  std::vector<int> boundary_edge_local;  // per mesh boundary edge: local edge (0..2) in that cell

  int node_count() const { return vertex_count + edge_count; }
};

P2Layout build_p2_layout(const Mesh& mesh);

/// Coordinates of all quadratic nodes.
std::vector<Vec2> p2_node_positions(const Mesh& mesh, const P2Layout& layout);

struct CellGeometry {
  double area;
  std::array<Vec2, 3> grad_bary;  // gradients of the barycentric coordinates
};

CellGeometry cell_geometry(const Mesh& mesh, std::size_t cell);

struct P2Values {
  std::array<double, 6> value;
  std::array<Vec2, 6> grad;
};

P2Values p2_basis(const CellGeometry& geom, const std::array<double, 3>& bary);

struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;  // fraction of the cell area
};

/// Exact for polynomials up to degree 5.
const std::array<QuadraturePoint, 7>& triangle_rule();

struct LinePoint {
  double s;  // position along the edge in [0, 1]
  double weight;
};

/// Three-point Gauss-Legendre on [0, 1], exact up to degree 5.
const std::array<LinePoint, 3>& line_rule();

/// Barycentric coordinates of the point at fraction s along local edge k of a cell.
std::array<double, 3> edge_point(int local_edge, double s);

/// Gradient of a quadratic vector field in one cell, (∇v)_ij = ∂v_i/∂x_j.
Mat2 p2_gradient(const P2Values& basis, const std::array<int, 6>& nodes,
                 const std::vector<Vec2>& field);

Vec2 p2_value(const P2Values& basis, const std::array<int, 6>& nodes,
              const std::vector<Vec2>& field);

/// Linear (P1) scalar on vertices evaluated at barycentric coordinates.
double p1_value(const std::array<int, 3>& tri, const std::vector<double>& field,
                const std::array<double, 3>& bary);

/// Per-component Dirichlet data for the velocity nodes.
struct VelocityConstraints {
  std::vector<std::optional<double>> x;
  std::vector<std::optional<double>> y;
};

/// Strong boundary data for the mixed velocity/pressure systems. Design
/// nodes take `design_value`, inflow nodes take `inflow_value`, slip nodes get
/// a zero normal component. Outflow is left natural. Slip walls must be axis
/// aligned.
VelocityConstraints velocity_constraints(const Mesh& mesh, const P2Layout& layout,
                                         const Vec2& design_value, const Vec2& inflow_value);

}  // namespace pshape::fem
