#include "pshape/mesh_gen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace pshape {

namespace {

constexpr double kPi = std::numbers::pi;

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

class Builder {
 public:
  int add(const Vec2& p) {
    nodes_.push_back(p);
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Vec2& at(int i) const { return nodes_[i]; }

  void triangle(int a, int b, int c) { triangles_.push_back({a, b, c}); }

  /// Fills the strip between two polylines that start on a common line and
  /// run side by side. `right` must lie to the right of the direction of
  /// travel. Advances whichever side lags in normalised arc length.
  void zip(const std::vector<int>& left, const std::vector<int>& right) {
    const auto fl = arc_fractions(left), fr = arc_fractions(right);
    const std::size_t nl = left.size() - 1, nr = right.size() - 1;
    std::size_t i = 0, j = 0;
    while (i < nl || j < nr) {
      bool advance_right;
      if (i == nl) {
        advance_right = true;
      } else if (j == nr) {
        advance_right = false;
      } else {
        advance_right = fr[j + 1] < fl[i + 1];
        const double area_r = signed_area(at(left[i]), at(right[j]), at(right[j + 1]));
        const double area_l = signed_area(at(left[i]), at(right[j]), at(left[i + 1]));
        if (advance_right && !(area_r > 0.0)) advance_right = false;
        if (!advance_right && !(area_l > 0.0)) advance_right = true;
      }
      if (advance_right) {
        triangle(left[i], right[j], right[j + 1]);
        ++j;
      } else {
        triangle(left[i], right[j], left[i + 1]);
        ++i;
      }
    }
  }

  /// Delaunay edge flips followed by Jacobi Laplacian smoothing of the nodes
  /// not marked fixed. Boundary nodes of the current triangulation never move.
  void improve(const std::vector<bool>& fixed, int smoothing_sweeps) {
    flip_to_delaunay();
    std::vector<bool> pinned = fixed;
    pinned.resize(nodes_.size(), false);
    for (const auto& [key, owners] : edge_owners()) {
      if (owners.size() == 1) pinned[key.first] = pinned[key.second] = true;
    }
    std::vector<std::vector<int>> neighbours(nodes_.size());
    for (const auto& t : triangles_) {
      for (int k = 0; k < 3; ++k) {
        neighbours[t[k]].push_back(t[(k + 1) % 3]);
        neighbours[t[k]].push_back(t[(k + 2) % 3]);
      }
    }
    for (int sweep = 0; sweep < smoothing_sweeps; ++sweep) {
      std::vector<Vec2> next = nodes_;
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (pinned[i] || neighbours[i].empty()) continue;
        Vec2 mean = Vec2::Zero();
        for (int j : neighbours[i]) mean += nodes_[j];
        mean /= static_cast<double>(neighbours[i].size());
        next[i] = 0.5 * (nodes_[i] + mean);
      }
      bool valid = true;
      for (const auto& t : triangles_) {
        if (!(signed_area(next[t[0]], next[t[1]], next[t[2]]) > 0.0)) {
          valid = false;
          break;
        }
      }
      if (!valid) break;
      nodes_ = std::move(next);
      flip_to_delaunay();
    }
  }

  /// Adds the y < 0 half by reflection. Nodes on y == 0 are shared.
  void mirror_about_x_axis() {
    const std::size_t n = nodes_.size();
    std::vector<int> image(n);
    for (std::size_t i = 0; i < n; ++i) {
      image[i] = nodes_[i].y() == 0.0 ? static_cast<int>(i) : add({nodes_[i].x(), -nodes_[i].y()});
    }
    const std::size_t m = triangles_.size();
    for (std::size_t c = 0; c < m; ++c) {
      const auto t = triangles_[c];
      triangle(image[t[0]], image[t[2]], image[t[1]]);
    }
  }

  template <typename Classify>
  Mesh finish(Classify classify) {
    Mesh mesh;
    mesh.nodes = std::move(nodes_);
    mesh.triangles = std::move(triangles_);
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // key -> (count, unused)
    std::map<std::pair<int, int>, std::array<int, 2>> oriented;
    for (const auto& t : mesh.triangles) {
      for (int k = 0; k < 3; ++k) {
        const int a = t[k], b = t[(k + 1) % 3];
        const auto key = edge_key(a, b);
        ++edges[key].first;
        oriented[key] = {a, b};
      }
    }
    for (const auto& [key, use] : edges) {
      if (use.first != 1) continue;
      const auto nodes = oriented[key];
      mesh.boundary_edges.push_back({nodes, classify(nodes[0], nodes[1], mesh.nodes)});
    }
    validate(mesh);
    return mesh;
  }

 private:
  std::map<std::pair<int, int>, std::vector<std::pair<std::size_t, int>>> edge_owners() const {
    std::map<std::pair<int, int>, std::vector<std::pair<std::size_t, int>>> owners;
    for (std::size_t c = 0; c < triangles_.size(); ++c) {
      const auto& t = triangles_[c];
      for (int k = 0; k < 3; ++k) owners[edge_key(t[k], t[(k + 1) % 3])].push_back({c, k});
    }
    return owners;
  }

  double angle_at(int apex, int a, int b) const {
    const Vec2 u = at(a) - at(apex), v = at(b) - at(apex);
    return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
  }

  void flip_to_delaunay() {
    for (int pass = 0; pass < 100; ++pass) {
      bool flipped = false;
      for (const auto& [key, owners] : edge_owners()) {
        if (owners.size() != 2) continue;
        const auto [c0, k0] = owners[0];
        const auto [c1, k1] = owners[1];
        const auto t0 = triangles_[c0], t1 = triangles_[c1];
        // Stale after an earlier flip in this pass.
        if (edge_key(t0[k0], t0[(k0 + 1) % 3]) != key || edge_key(t1[k1], t1[(k1 + 1) % 3]) != key) {
          continue;
        }
        const int a = t0[k0], b = t0[(k0 + 1) % 3], p = t0[(k0 + 2) % 3], q = t1[(k1 + 2) % 3];
        if (angle_at(p, a, b) + angle_at(q, a, b) <= kPi + 1e-10) continue;
        if (!(signed_area(at(p), at(a), at(q)) > 0.0) || !(signed_area(at(q), at(b), at(p)) > 0.0)) continue;
        triangles_[c0] = {p, a, q};
        triangles_[c1] = {q, b, p};
        flipped = true;
      }
      if (!flipped) break;
    }
  }

  std::vector<double> arc_fractions(const std::vector<int>& line) const {
    std::vector<double> s(line.size(), 0.0);
    for (std::size_t k = 1; k < line.size(); ++k) s[k] = s[k - 1] + (at(line[k]) - at(line[k - 1])).norm();
    for (auto& v : s) v /= s.back();
    return s;
  }

  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
};

/// Upper-half curve family between the obstacle (w = 0) and the core square
/// of half-width `half` (w = 1), parameterised by the polar angle.
struct CoreFamily {
  double ax, ay, half;

  Vec2 obstacle(double theta) const { return {ax * std::cos(theta), ay * std::sin(theta)}; }

  Vec2 square(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return half * Vec2(c, s) / std::max(std::abs(c), std::abs(s));
  }

  Vec2 at(double w, double theta) const { return (1.0 - w) * obstacle(theta) + w * square(theta); }

  /// Angles of `n` + 1 points equally spaced in arc length along curve w.
  std::vector<double> resample(double w, int n) const {
    constexpr int dense = 4096;
    std::vector<double> theta(dense + 1), s(dense + 1, 0.0);
    for (int k = 0; k <= dense; ++k) theta[k] = kPi * k / dense;
    for (int k = 1; k <= dense; ++k) s[k] = s[k - 1] + (at(w, theta[k]) - at(w, theta[k - 1])).norm();
    std::vector<double> out(n + 1);
    out[0] = 0.0;
    out[n] = kPi;
    std::size_t seg = 0;
    for (int j = 1; j < n; ++j) {
      const double target = s[dense] * j / n;
      while (s[seg + 1] < target) ++seg;
      const double f = (target - s[seg]) / (s[seg + 1] - s[seg]);
      out[j] = theta[seg] + f * (theta[seg + 1] - theta[seg]);
    }
    return out;
  }

  double length(double w) const {
    constexpr int dense = 1024;
    double sum = 0.0;
    for (int k = 1; k <= dense; ++k) {
      sum += (at(w, kPi * k / dense) - at(w, kPi * (k - 1) / dense)).norm();
    }
    return sum;
  }

  double mean_gap() const {
    constexpr int samples = 256;
    double sum = 0.0;
    for (int k = 0; k < samples; ++k) {
      const double theta = kPi * (k + 0.5) / samples;
      sum += (square(theta) - obstacle(theta)).norm();
    }
    return sum / samples;
  }
};

/// x positions of the block columns from x0 outwards to x_end, with spacing
/// growing from h0 by `growth` up to `hmax`.
std::vector<double> column_positions(double x0, double x_end, double h0, double growth,
                                     double hmax) {
  std::vector<double> steps;
  double h = h0, covered = 0.0;
  while (covered < x_end - x0) {
    h = std::min(h * growth, hmax);
    steps.push_back(h);
    covered += h;
  }
  // Drop the overshooting step when that lands closer, then rescale to fit.
  if (steps.size() > 1 && covered - (x_end - x0) > 0.5 * steps.back()) {
    covered -= steps.back();
    steps.pop_back();
  }
  std::vector<double> xs{x0};
  for (double step : steps) xs.push_back(xs.back() + step * (x_end - x0) / covered);
  xs.back() = x_end;
  return xs;
}

}  // namespace

double obstacle_area(const ChannelSpec& spec) {
  if (spec.obstacle == ObstacleKind::None) return 0.0;
  return kPi * spec.semi_axis_x * spec.semi_axis_y;
}

Mesh generate_channel_mesh(const ChannelSpec& spec) {
  const double half_h = 0.5 * spec.height, half_l = 0.5 * spec.length;
  auto classify = [&](int ia, int ib, const std::vector<Vec2>& nodes) {
    const Vec2 &a = nodes[ia], &b = nodes[ib];
    const double tol = 1e-9 * spec.length;
    if (std::abs(a.x() + half_l) < tol && std::abs(b.x() + half_l) < tol) return BoundaryTag::Inflow;
    if (std::abs(a.x() - half_l) < tol && std::abs(b.x() - half_l) < tol) return BoundaryTag::Outflow;
    if (std::abs(std::abs(a.y()) - half_h) < tol && std::abs(std::abs(b.y()) - half_h) < tol) {
      return BoundaryTag::SlipWall;
    }
    return BoundaryTag::Design;
  };

  if (spec.obstacle == ObstacleKind::None) {
    const int ny = std::max(2, spec.boundary_nodes / 4);
    const int nx = std::max(2, static_cast<int>(std::lround(ny * spec.length / spec.height)));
    return generate_rectangle_mesh({-half_l, -half_h}, {half_l, half_h}, nx, ny,
                                   {BoundaryTag::SlipWall, BoundaryTag::Outflow,
                                    BoundaryTag::SlipWall, BoundaryTag::Inflow});
  }

  if (spec.boundary_nodes < 8 || spec.boundary_nodes % 2 != 0) {
    throw std::invalid_argument("boundary_nodes must be even and at least 8");
  }
  if (spec.semi_axis_x <= 0.0 || spec.semi_axis_y <= 0.0 ||
      std::max(spec.semi_axis_x, spec.semi_axis_y) >= 0.8 * half_h || half_l <= half_h) {
    throw std::invalid_argument("obstacle does not fit the channel core");
  }

  const CoreFamily family{spec.semi_axis_x, spec.semi_axis_y, half_h};
  const double gap = family.mean_gap();
  Builder b;

  auto make_curve = [&](double w, int n) {
    std::vector<int> ids;
    if (w >= 1.0) {
      // Core square: right side, top, left side with nodes on the corners.
      const int q = n / 4;
      for (int k = 0; k <= q; ++k) ids.push_back(b.add({half_h, half_h * k / q}));
      for (int k = 1; k <= 2 * q; ++k) ids.push_back(b.add({half_h - 2.0 * half_h * k / (2 * q), half_h}));
      for (int k = 1; k <= q; ++k) ids.push_back(b.add({-half_h, half_h - half_h * k / q}));
      return ids;
    }
    const auto theta = family.resample(w, n);
    for (int k = 0; k <= n; ++k) {
      Vec2 p = family.at(w, theta[k]);
      if (k == 0 || k == n) p.y() = 0.0;
      ids.push_back(b.add(p));
    }
    return ids;
  };

  const int n0 = spec.boundary_nodes / 2;
  double w = 0.0;
  int n = n0;
  double h = family.length(0.0) / n0;
  std::vector<int> inner = make_curve(0.0, n0);
  int layer = 0;
  int structured_nodes = static_cast<int>(inner.size());
  const double core_cap = std::min(spec.max_size, 0.25 * half_h);
  while (w < 1.0) {
    ++layer;
    double thickness;
    int n_next;
    if (layer <= spec.structured_layers) {
      thickness = family.length(w) / n;
      n_next = n;
    } else {
      thickness = std::min(h * spec.growth, core_cap);
      n_next = -1;
    }
    double w_next = w + thickness / gap;
    if (w_next > 1.0 - 0.5 * thickness / gap) w_next = 1.0;
    if (n_next < 0) {
      n_next = static_cast<int>(std::lround(family.length(w_next) / thickness));
      n_next = std::clamp(n_next, 4, n);
    }
    if (w_next >= 1.0) n_next = std::max(4, 4 * static_cast<int>(std::lround(n_next / 4.0)));
    auto outer = make_curve(w_next, n_next);
    b.zip(inner, outer);
    if (layer == spec.structured_layers) structured_nodes = outer.back() + 1;
    inner = std::move(outer);
    w = w_next;
    n = n_next;
    h = thickness;
  }

  // Side blocks. `inner` is the core square: right side, top, left side.
  const int q = n / 4;
  std::vector<int> right_col(inner.begin(), inner.begin() + q + 1);
  std::vector<int> left_col(inner.end() - (q + 1), inner.end());
  std::reverse(left_col.begin(), left_col.end());
  const double h_side = half_h / q;
  const auto xs = column_positions(half_h, half_l, h_side, spec.growth, spec.max_size);

  auto make_column = [&](double x, double spacing) {
    const int m = std::max(1, static_cast<int>(std::lround(half_h / spacing)));
    std::vector<int> ids;
    for (int k = 0; k <= m; ++k) ids.push_back(b.add({x, k == m ? half_h : half_h * k / m}));
    return ids;
  };

  std::vector<int> prev_right = right_col, prev_left = left_col;
  for (std::size_t j = 1; j < xs.size(); ++j) {
    const double spacing = xs[j] - xs[j - 1];
    auto col_r = make_column(xs[j], spacing);
    auto col_l = make_column(-xs[j], spacing);
    b.zip(prev_right, col_r);
    b.zip(col_l, prev_left);
    prev_right = std::move(col_r);
    prev_left = std::move(col_l);
  }

  std::vector<bool> fixed(structured_nodes, true);
  b.improve(fixed, 8);
  b.mirror_about_x_axis();
  return b.finish(classify);
}

ChannelSpec fit_cell_count(ChannelSpec spec, int target_cells) {
  if (spec.obstacle == ObstacleKind::None) {
    // Rectangle: 2 * nx * ny cells with nx = ny * L / H and ny = nodes / 4.
    const double ny = std::sqrt(target_cells * spec.height / (2.0 * spec.length));
    spec.boundary_nodes = std::max(8, 4 * static_cast<int>(std::lround(ny)));
    return spec;
  }
  ChannelSpec best = spec;
  long best_err = -1;
  for (int nodes = 8; nodes <= 2048; nodes += 2) {
    spec.boundary_nodes = nodes;
    const long cells = static_cast<long>(generate_channel_mesh(spec).cell_count());
    const long err = std::abs(cells - target_cells);
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best = spec;
    }
    if (cells > 2 * target_cells) break;
  }
  return best;
}

Mesh generate_rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny,
                             const std::array<BoundaryTag, 4>& side_tags) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("rectangle needs at least one cell per side");
  Builder b;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = i == nx ? hi.x() : lo.x() + (hi.x() - lo.x()) * i / nx;
      const double y = j == ny ? hi.y() : lo.y() + (hi.y() - lo.y()) * j / ny;
      b.add({x, y});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      const bool left_half = 2 * i + 1 < nx, bottom_half = 2 * j + 1 < ny;
      if (left_half == bottom_half) {
        b.triangle(p00, p10, p11);
        b.triangle(p00, p11, p01);
      } else {
        b.triangle(p00, p10, p01);
        b.triangle(p10, p11, p01);
      }
    }
  }
  const double tol = 1e-12 * std::max((hi - lo).norm(), 1.0);
  return b.finish([&](int ia, int ic, const std::vector<Vec2>& nodes) {
    const Vec2 &a = nodes[ia], &c = nodes[ic];
    if (std::abs(a.y() - lo.y()) < tol && std::abs(c.y() - lo.y()) < tol) return side_tags[0];
    if (std::abs(a.x() - hi.x()) < tol && std::abs(c.x() - hi.x()) < tol) return side_tags[1];
    if (std::abs(a.y() - hi.y()) < tol && std::abs(c.y() - hi.y()) < tol) return side_tags[2];
    return side_tags[3];
  });
}

Mesh generate_star_annulus(const std::vector<Vec2>& obstacle, double outer_scale, int rings,
                           BoundaryTag outer_tag) {
  if (obstacle.size() < 3 || rings < 1 || !(outer_scale > 1.0)) {
    throw std::invalid_argument("star annulus needs >= 3 vertices, >= 1 ring, scale > 1");
  }
  Builder b;
  const std::size_t n = obstacle.size();
  std::vector<std::vector<int>> loops(rings + 1);
  for (int r = 0; r <= rings; ++r) {
    const double s = std::pow(outer_scale, static_cast<double>(r) / rings);
    for (const auto& p : obstacle) loops[r].push_back(b.add(s * p));
  }
  for (int r = 0; r < rings; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t k1 = (k + 1) % n;
      const int a = loops[r][k], c = loops[r][k1], d = loops[r + 1][k], e = loops[r + 1][k1];
      // Inner loop is counterclockwise, so the fluid quad is (a, d, e, c).
      if ((b.at(a) - b.at(e)).squaredNorm() <= (b.at(d) - b.at(c)).squaredNorm()) {
        b.triangle(a, d, e);
        b.triangle(a, e, c);
      } else {
        b.triangle(a, d, c);
        b.triangle(d, e, c);
      }
    }
  }
  const int first_outer = loops[rings].front();
  return b.finish([&](int a, int, const std::vector<Vec2>&) {
    return a >= first_outer ? outer_tag : BoundaryTag::Design;
  });
}

std::vector<Vec2> ellipse_polygon(int n, double semi_x, double semi_y, double phase) {
  std::vector<Vec2> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double t = phase + 2.0 * kPi * k / n;
    out.emplace_back(semi_x * std::cos(t), semi_y * std::sin(t));
  }
  return out;
}

}  // namespace pshape
