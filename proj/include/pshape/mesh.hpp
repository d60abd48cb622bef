#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pshape {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class BoundaryTag { Inflow, Outflow, SlipWall, Design };

std::string to_string(BoundaryTag tag);
std::optional<BoundaryTag> parse_boundary_tag(const std::string& word);

/// A boundary segment. After validation the node order is such that the
/// fluid lies to the left of a -> b.
struct BoundaryEdge {
  std::array<int, 2> nodes;
  BoundaryTag tag;
};

/// Unstructured triangular mesh of the fluid region. The obstacle interior is
/// not meshed; its boundary is the set of Design edges.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t cell_count() const { return triangles.size(); }
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by morph when a cell would lose positive orientation.
class InvertedCellError : public MeshError {
 public:
  InvertedCellError(std::size_t cell, double signed_area);
  std::size_t cell() const { return cell_; }
  double signed_area() const { return signed_area_; }

 private:
  std::size_t cell_;
  double signed_area_;
};

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c);
double cell_area(const Mesh& mesh, std::size_t cell);

/// Checks all structural invariants and orients boundary edges so that the
/// fluid is on their left. Throws MeshError on violation.
void validate(Mesh& mesh);

double volume(const Mesh& mesh);
Vec2 barycenter(const Mesh& mesh);

/// Ordered Design boundary. Each loop lists node indices in the direction
/// that keeps the fluid on the left, i.e. clockwise around the obstacle.
struct DesignLoop {
  std::vector<int> nodes;
  std::vector<std::size_t> edges;  // boundary_edges index of (nodes[k], nodes[k+1])
  bool closed = true;
};
std::vector<DesignLoop> design_loops(const Mesh& mesh);

/// Sorted unique node indices touching a Design edge.
std::vector<int> design_nodes(const Mesh& mesh);

/// Unit normal of a boundary edge pointing out of the fluid.
Vec2 edge_normal(const Mesh& mesh, const BoundaryEdge& edge);
double edge_length(const Mesh& mesh, const BoundaryEdge& edge);

/// Outward-of-fluid unit normals on Design nodes, indexed by mesh node
/// (zero on nodes off the Design boundary). Each node normal bisects the
/// normals of its adjacent Design edges.
std::vector<Vec2> design_normals(const Mesh& mesh);

/// x <- x + t u(x) on every node. Throws InvertedCellError carrying the worst
/// cell when any triangle loses positive area.
Mesh morph(const Mesh& mesh, const std::vector<Vec2>& field, double t);

struct QualityReport {
  std::vector<double> aspect_ratio;       // circumradius / (2 inradius), >= 1
  std::vector<double> min_interior_angle;  // degrees
  double max_aspect_ratio = 0.0;
  double min_angle = 0.0;
  double tip_opening_angle = 0.0;  // degrees; 0 when no Design loop exists
  double half_axis_ratio = 0.0;    // 0 when no Design loop exists
};

double triangle_aspect_ratio(const Vec2& a, const Vec2& b, const Vec2& c);
std::array<double, 3> triangle_angles(const Vec2& a, const Vec2& b, const Vec2& c);

QualityReport quality(const Mesh& mesh);

struct TipMetrics {
  double opening_angle = 0.0;  // degrees, measured inside the obstacle
  double half_axis_ratio = 0.0;
  int tip_node = -1;
};

/// Upstream tip of the (first) Design loop: the node with minimal x, ties
/// broken by smaller |y|.
TipMetrics tip_metrics(const Mesh& mesh);

}  // namespace pshape
