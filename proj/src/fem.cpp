#include "pshape/fem.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace pshape::fem {

P2Layout build_p2_layout(const Mesh& mesh) {
  P2Layout layout;
  layout.vertex_count = static_cast<int>(mesh.node_count());
  std::map<std::pair<int, int>, int> edge_id;
  layout.cell_nodes.resize(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    auto& nodes = layout.cell_nodes[c];
    for (int k = 0; k < 3; ++k) {
      nodes[k] = t[k];
      const int a = t[k], b = t[(k + 1) % 3];
      const auto key = a < b ? std::pair{a, b} : std::pair{b, a};
      auto [it, inserted] = edge_id.try_emplace(key, static_cast<int>(layout.edges.size()));
      if (inserted) layout.edges.push_back({key.first, key.second});
      nodes[3 + k] = layout.vertex_count + it->second;
    }
  }
  layout.edge_count = static_cast<int>(layout.edges.size());

  std::map<std::pair<int, int>, std::pair<int, int>> owner;  // directed edge -> (cell, local)
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    for (int k = 0; k < 3; ++k) owner[{t[k], t[(k + 1) % 3]}] = {static_cast<int>(c), k};
  }
  for (const auto& be : mesh.boundary_edges) {
    auto it = owner.find({be.nodes[0], be.nodes[1]});
    if (it == owner.end()) throw MeshError("boundary edge orientation does not match its cell");
    const auto [cell, local] = it->second;
    layout.boundary_edge_cell.push_back(cell);
    layout.boundary_edge_local.push_back(local);
    layout.boundary_edge_node.push_back(layout.cell_nodes[cell][3 + local]);
  }
  return layout;
}

std::vector<Vec2> p2_node_positions(const Mesh& mesh, const P2Layout& layout) {
  std::vector<Vec2> pos(mesh.nodes);
  pos.reserve(layout.node_count());
  for (const auto& e : layout.edges) pos.push_back(0.5 * (mesh.nodes[e[0]] + mesh.nodes[e[1]]));
  return pos;
}

CellGeometry cell_geometry(const Mesh& mesh, std::size_t cell) {
  const auto& t = mesh.triangles[cell];
  const Vec2 &p0 = mesh.nodes[t[0]], &p1 = mesh.nodes[t[1]], &p2 = mesh.nodes[t[2]];
  const double area = signed_area(p0, p1, p2);
  const double inv = 1.0 / (2.0 * area);
  CellGeometry g;
  g.area = area;
  g.grad_bary[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) * inv;
  g.grad_bary[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) * inv;
  g.grad_bary[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) * inv;
  return g;
}

P2Values p2_basis(const CellGeometry& geom, const std::array<double, 3>& l) {
  const auto& g = geom.grad_bary;
  P2Values out;
  for (int k = 0; k < 3; ++k) {
    out.value[k] = l[k] * (2.0 * l[k] - 1.0);
    out.grad[k] = (4.0 * l[k] - 1.0) * g[k];
    const int a = k, b = (k + 1) % 3;
    out.value[3 + k] = 4.0 * l[a] * l[b];
    out.grad[3 + k] = 4.0 * (l[b] * g[a] + l[a] * g[b]);
  }
  return out;
}

const std::array<QuadraturePoint, 7>& triangle_rule() {
  static const std::array<QuadraturePoint, 7> rule = [] {
    constexpr double a1 = 0.0597158717897698, b1 = 0.4701420641051151, w1 = 0.1323941527885062;
    constexpr double a2 = 0.7974269853530873, b2 = 0.1012865073234563, w2 = 0.1259391805448271;
    return std::array<QuadraturePoint, 7>{{
        {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225},
        {{a1, b1, b1}, w1},
        {{b1, a1, b1}, w1},
        {{b1, b1, a1}, w1},
        {{a2, b2, b2}, w2},
        {{b2, a2, b2}, w2},
        {{b2, b2, a2}, w2},
    }};
  }();
  return rule;
}

const std::array<LinePoint, 3>& line_rule() {
  static const std::array<LinePoint, 3> rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return std::array<LinePoint, 3>{{{0.5 - d, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + d, 5.0 / 18.0}}};
  }();
  return rule;
}

std::array<double, 3> edge_point(int local_edge, double s) {
  std::array<double, 3> l{0.0, 0.0, 0.0};
  l[local_edge] = 1.0 - s;
  l[(local_edge + 1) % 3] = s;
  return l;
}

Mat2 p2_gradient(const P2Values& basis, const std::array<int, 6>& nodes,
                 const std::vector<Vec2>& field) {
  Mat2 g = Mat2::Zero();
  for (int a = 0; a < 6; ++a) g += field[nodes[a]] * basis.grad[a].transpose();
  return g;
}

Vec2 p2_value(const P2Values& basis, const std::array<int, 6>& nodes,
              const std::vector<Vec2>& field) {
  Vec2 v = Vec2::Zero();
  for (int a = 0; a < 6; ++a) v += basis.value[a] * field[nodes[a]];
  return v;
}

double p1_value(const std::array<int, 3>& tri, const std::vector<double>& field,
                const std::array<double, 3>& bary) {
  return bary[0] * field[tri[0]] + bary[1] * field[tri[1]] + bary[2] * field[tri[2]];
}

VelocityConstraints velocity_constraints(const Mesh& mesh, const P2Layout& layout,
                                         const Vec2& design_value, const Vec2& inflow_value) {
  const int n = layout.node_count();
  // 0 free, 1 slip-x (normal along x), 2 slip-y, 3 inflow, 4 design; highest wins.
  std::vector<int> kind(n, 0);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    int k = 0;
    switch (be.tag) {
      case BoundaryTag::Design: k = 4; break;
      case BoundaryTag::Inflow: k = 3; break;
      case BoundaryTag::Outflow: k = 0; break;
      case BoundaryTag::SlipWall: {
        const Vec2 nrm = edge_normal(mesh, be);
        if (std::abs(nrm.x()) > 1.0 - 1e-9) {
          k = 1;
        } else if (std::abs(nrm.y()) > 1.0 - 1e-9) {
          k = 2;
        } else {
          throw std::invalid_argument("slip wall edge is not axis aligned");
        }
        break;
      }
    }
    for (int node : {be.nodes[0], be.nodes[1], layout.boundary_edge_node[e]}) {
      kind[node] = std::max(kind[node], k);
    }
  }
  VelocityConstraints out;
  out.x.resize(n);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    switch (kind[i]) {
      case 4: out.x[i] = design_value.x(); out.y[i] = design_value.y(); break;
      case 3: out.x[i] = inflow_value.x(); out.y[i] = inflow_value.y(); break;
      case 2: out.y[i] = 0.0; break;
      case 1: out.x[i] = 0.0; break;
      default: break;
    }
  }
  return out;
}

}  // namespace pshape::fem
