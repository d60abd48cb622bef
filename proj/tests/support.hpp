#pragma once

#include <cmath>
#include <vector>

#include "pshape/mesh_gen.hpp"

namespace testing {

using pshape::BoundaryTag;
using pshape::Mesh;
using pshape::Vec2;

inline double shoelace(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

// ~250 cell channel with a unit cylinder
inline Mesh small_channel() {
  pshape::ChannelSpec spec;
  spec.boundary_nodes = 12;
  spec.structured_layers = 2;
  spec.max_size = 5.0;
  return pshape::generate_channel_mesh(spec);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace testing
