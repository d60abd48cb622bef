#pragma once

#include <array>
#include <vector>

#include "pshape/mesh.hpp"

namespace pshape {

enum class ObstacleKind { None, Circle, Ellipse };

/// Channel [-length/2, length/2] x [-height/2, height/2] with an obstacle
/// centred at the origin. Inflow on the left, outflow on the right, slip walls
/// top and bottom, Design on the obstacle.
struct ChannelSpec {
  double length = 50.0;
  double height = 10.0;
  ObstacleKind obstacle = ObstacleKind::Circle;
  double semi_axis_x = 0.5;
  double semi_axis_y = 0.5;
  int boundary_nodes = 64;  // nodes on the obstacle, even
  int structured_layers = 3;  // rings that keep the obstacle's node count
  double growth = 1.15;       // cell-size ratio between neighbouring rings
  double max_size = 2.5;      // cell-size cap in the far field
};

/// Builds the channel mesh. The result is mirror symmetric about y = 0.
Mesh generate_channel_mesh(const ChannelSpec& spec);

/// Returns `spec` with boundary_nodes chosen so that the generated cell count
/// is closest to `target_cells`.
ChannelSpec fit_cell_count(ChannelSpec spec, int target_cells);

/// Area of the ideal (smooth) obstacle.
double obstacle_area(const ChannelSpec& spec);

/// Structured rectangle split into triangles with a diagonal pattern that is
/// mirror symmetric about both centre lines. Tags are {bottom, right, top, left}.
Mesh generate_rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny,
                             const std::array<BoundaryTag, 4>& side_tags);

/// Annulus between a star-shaped obstacle polygon (counterclockwise, around
/// the origin) and its copy scaled by `outer_scale`, with geometrically
/// growing rings. Obstacle edges are Design; the outer loop gets `outer_tag`.
Mesh generate_star_annulus(const std::vector<Vec2>& obstacle, double outer_scale, int rings,
                           BoundaryTag outer_tag = BoundaryTag::Inflow);

/// Regular polygon with `n` vertices approximating an ellipse, counterclockwise
/// from angle `phase`.
std::vector<Vec2> ellipse_polygon(int n, double semi_x, double semi_y, double phase = 0.0);

}  // namespace pshape
