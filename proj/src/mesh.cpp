#include "pshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>

namespace pshape {

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Inflow: return "inflow";
    case BoundaryTag::Outflow: return "outflow";
    case BoundaryTag::SlipWall: return "slip";
    case BoundaryTag::Design: return "design";
  }
  return "unknown";
}

std::optional<BoundaryTag> parse_boundary_tag(const std::string& word) {
  if (word == "inflow") return BoundaryTag::Inflow;
  if (word == "outflow") return BoundaryTag::Outflow;
  if (word == "slip") return BoundaryTag::SlipWall;
  if (word == "design") return BoundaryTag::Design;
  return std::nullopt;
}

InvertedCellError::InvertedCellError(std::size_t cell, double signed_area)
    : MeshError("inverted cell " + std::to_string(cell) +
                " (signed area " + std::to_string(signed_area) + ")"),
      cell_(cell),
      signed_area_(signed_area) {}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double cell_area(const Mesh& mesh, std::size_t cell) {
  const auto& t = mesh.triangles[cell];
  return signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
}

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey key_of(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

struct EdgeUse {
  int count = 0;
  int from = -1;  // orientation as seen by the (last) owning triangle
  int to = -1;
};

}  // namespace

void validate(Mesh& mesh) {
  const int n = static_cast<int>(mesh.nodes.size());
  if (mesh.triangles.empty()) throw MeshError("mesh has no cells");

  std::map<EdgeKey, EdgeUse> edges;
  for (std::size_t c = 0; c < mesh.triangles.size(); ++c) {
    const auto& t = mesh.triangles[c];
    for (int v : t) {
      if (v < 0 || v >= n) {
        throw MeshError("cell " + std::to_string(c) + " references node " +
                        std::to_string(v) + " out of range");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw MeshError("cell " + std::to_string(c) + " has repeated nodes");
    }
    const double area = cell_area(mesh, c);
    if (!(area > 0.0)) throw InvertedCellError(c, area);
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      auto& use = edges[key_of(a, b)];
      ++use.count;
      use.from = a;
      use.to = b;
    }
  }

  std::map<EdgeKey, std::size_t> tagged;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    auto& be = mesh.boundary_edges[e];
    const auto key = key_of(be.nodes[0], be.nodes[1]);
    auto it = edges.find(key);
    if (it == edges.end() || it->second.count != 1) {
      throw MeshError("tagged edge (" + std::to_string(be.nodes[0]) + ", " +
                      std::to_string(be.nodes[1]) + ") is not a boundary edge");
    }
    if (!tagged.emplace(key, e).second) {
      throw MeshError("boundary edge (" + std::to_string(be.nodes[0]) + ", " +
                      std::to_string(be.nodes[1]) + ") is tagged twice");
    }
    be.nodes = {it->second.from, it->second.to};
  }

  std::vector<int> boundary_degree(n, 0);
  for (const auto& [key, use] : edges) {
    if (use.count > 2) {
      throw MeshError("edge (" + std::to_string(key.first) + ", " +
                      std::to_string(key.second) + ") is shared by more than two cells");
    }
    if (use.count == 1) {
      if (!tagged.count(key)) {
        throw MeshError("untagged boundary edge (" + std::to_string(key.first) + ", " +
                        std::to_string(key.second) + ")");
      }
      ++boundary_degree[key.first];
      ++boundary_degree[key.second];
    }
  }
  for (int v = 0; v < n; ++v) {
    if (boundary_degree[v] != 0 && boundary_degree[v] != 2) {
      throw MeshError("boundary is not a set of closed loops at node " + std::to_string(v));
    }
  }
}

double volume(const Mesh& mesh) {
  double sum = 0.0;
  for (std::size_t c = 0; c < mesh.triangles.size(); ++c) sum += cell_area(mesh, c);
  return sum;
}

Vec2 barycenter(const Mesh& mesh) {
  Vec2 moment = Vec2::Zero();
  double sum = 0.0;
  for (std::size_t c = 0; c < mesh.triangles.size(); ++c) {
    const auto& t = mesh.triangles[c];
    const double area = cell_area(mesh, c);
    moment += area * (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]) / 3.0;
    sum += area;
  }
  return moment / sum;
}

Vec2 edge_normal(const Mesh& mesh, const BoundaryEdge& edge) {
  const Vec2 d = mesh.nodes[edge.nodes[1]] - mesh.nodes[edge.nodes[0]];
  const double len = d.norm();
  if (!(len > 0.0)) {
    throw MeshError("degenerate boundary edge (" + std::to_string(edge.nodes[0]) + ", " +
                    std::to_string(edge.nodes[1]) + ")");
  }
  // Fluid is on the left of a -> b, so the right-hand normal leaves the fluid.
  return Vec2(d.y(), -d.x()) / len;
}

double edge_length(const Mesh& mesh, const BoundaryEdge& edge) {
  return (mesh.nodes[edge.nodes[1]] - mesh.nodes[edge.nodes[0]]).norm();
}

std::vector<DesignLoop> design_loops(const Mesh& mesh) {
  std::map<int, std::size_t> outgoing;
  std::map<int, int> incoming_count;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::Design) continue;
    outgoing[be.nodes[0]] = e;
    ++incoming_count[be.nodes[1]];
  }

  std::vector<DesignLoop> loops;
  std::map<int, bool> visited;
  auto walk = [&](int start, bool closed) {
    DesignLoop loop;
    loop.closed = closed;
    int v = start;
    loop.nodes.push_back(v);
    while (true) {
      auto it = outgoing.find(v);
      if (it == outgoing.end()) break;
      visited[v] = true;
      const auto& be = mesh.boundary_edges[it->second];
      loop.edges.push_back(it->second);
      v = be.nodes[1];
      if (v == start) break;
      loop.nodes.push_back(v);
    }
    loops.push_back(std::move(loop));
  };

  // Open chains start where no Design edge arrives.
  for (const auto& [v, e] : outgoing) {
    if (!incoming_count.count(v)) walk(v, false);
  }
  for (const auto& [v, e] : outgoing) {
    if (!visited[v]) walk(v, true);
  }
  return loops;
}

std::vector<int> design_nodes(const Mesh& mesh) {
  std::vector<int> out;
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::Design) continue;
    out.push_back(be.nodes[0]);
    out.push_back(be.nodes[1]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Vec2> design_normals(const Mesh& mesh) {
  std::vector<Vec2> normals(mesh.node_count(), Vec2::Zero());
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != BoundaryTag::Design) continue;
    const Vec2 n = edge_normal(mesh, be);
    normals[be.nodes[0]] += n;
    normals[be.nodes[1]] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

Mesh morph(const Mesh& mesh, const std::vector<Vec2>& field, double t) {
  if (field.size() != mesh.node_count()) {
    throw MeshError("deformation field has " + std::to_string(field.size()) +
                    " entries, mesh has " + std::to_string(mesh.node_count()) + " nodes");
  }
  Mesh out = mesh;
  if (t != 0.0) {
    for (std::size_t i = 0; i < out.nodes.size(); ++i) out.nodes[i] += t * field[i];
  }
  std::size_t worst = 0;
  double worst_area = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < out.triangles.size(); ++c) {
    const double area = cell_area(out, c);
    if (area < worst_area) {
      worst_area = area;
      worst = c;
    }
  }
  if (!(worst_area > 0.0)) throw InvertedCellError(worst, worst_area);
  return out;
}

double triangle_aspect_ratio(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double area = std::abs(signed_area(a, b, c));
  const double s = 0.5 * (la + lb + lc);
  // R = abc / (4A), r = A / s, so R / (2r) = abc s / (8 A^2).
  return la * lb * lc * s / (8.0 * area * area);
}

std::array<double, 3> triangle_angles(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto angle_at = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Vec2 u = q - p, v = r - p;
    return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v)) * 180.0 /
           std::numbers::pi;
  };
  return {angle_at(a, b, c), angle_at(b, c, a), angle_at(c, a, b)};
}

QualityReport quality(const Mesh& mesh) {
  QualityReport report;
  const std::size_t m = mesh.cell_count();
  report.aspect_ratio.resize(m);
  report.min_interior_angle.resize(m);
  report.max_aspect_ratio = 0.0;
  report.min_angle = 180.0;
  for (std::size_t c = 0; c < m; ++c) {
    const auto& t = mesh.triangles[c];
    const Vec2 &a = mesh.nodes[t[0]], &b = mesh.nodes[t[1]], &p = mesh.nodes[t[2]];
    report.aspect_ratio[c] = triangle_aspect_ratio(a, b, p);
    const auto angles = triangle_angles(a, b, p);
    report.min_interior_angle[c] = std::min({angles[0], angles[1], angles[2]});
    report.max_aspect_ratio = std::max(report.max_aspect_ratio, report.aspect_ratio[c]);
    report.min_angle = std::min(report.min_angle, report.min_interior_angle[c]);
  }
  const auto tip = tip_metrics(mesh);
  report.tip_opening_angle = tip.opening_angle;
  report.half_axis_ratio = tip.half_axis_ratio;
  return report;
}

TipMetrics tip_metrics(const Mesh& mesh) {
  TipMetrics out;
  const auto loops = design_loops(mesh);
  if (loops.empty()) return out;
  const DesignLoop* loop = &loops.front();
  for (const auto& l : loops) {
    if (l.closed) {
      loop = &l;
      break;
    }
  }
  const auto& ids = loop->nodes;
  const std::size_t n = ids.size();

  std::size_t tip = 0;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& p = mesh.nodes[ids[k]];
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
    if (p.x() < xmin - 1e-12) {
      xmin = p.x();
      tip = k;
    } else if (std::abs(p.x() - xmin) <= 1e-12 &&
               std::abs(p.y()) < std::abs(mesh.nodes[ids[tip]].y())) {
      tip = k;
    }
  }
  out.tip_node = ids[tip];
  if (ymax > ymin) out.half_axis_ratio = (xmax - xmin) / (ymax - ymin);

  if (loop->closed && n >= 3) {
    // Loop runs clockwise around the obstacle; walking it backwards keeps the
    // obstacle on the left, so the interior angle is swept from `ahead` to `behind`.
    const Vec2& p = mesh.nodes[ids[tip]];
    const Vec2 behind = mesh.nodes[ids[(tip + 1) % n]] - p;
    const Vec2 ahead = mesh.nodes[ids[(tip + n - 1) % n]] - p;
    double angle = std::atan2(ahead.x() * behind.y() - ahead.y() * behind.x(), ahead.dot(behind));
    if (angle < 0.0) angle += 2.0 * std::numbers::pi;
    out.opening_angle = angle * 180.0 / std::numbers::pi;
  }
  return out;
}

}  // namespace pshape
