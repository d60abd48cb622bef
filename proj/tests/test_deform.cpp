#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "pshape/deform.hpp"
#include "support.hpp"

using namespace pshape;

namespace {

// gamma = cos(theta) + 0.3 on the obstacle: smooth, not symmetric
SensitivityField smooth_gamma(const Mesh& mesh) {
  SensitivityField g;
  g.nodes = design_nodes(mesh);
  g.gamma.assign(mesh.node_count(), 0.0);
  for (int v : g.nodes) g.gamma[v] = std::cos(std::atan2(mesh.nodes[v].y(), mesh.nodes[v].x())) + 0.3;
  return g;
}

double max_diff(const DeformationField& a, const DeformationField& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) d = std::max(d, (a.u[i] - b.u[i]).lpNorm<Eigen::Infinity>());
  return d;
}

// strip [0,2]x[0,1]: bottom fixed, top loaded with g, free (unloaded Design) sides
struct Strip {
  Mesh mesh;
  EdgeLoad load;
};

Strip make_strip(double g) {
  const std::array<BoundaryTag, 4> sides{BoundaryTag::SlipWall, BoundaryTag::Design, BoundaryTag::Design,
                                         BoundaryTag::Design};
  Strip s{generate_rectangle_mesh({0, 0}, {2, 1}, 8, 6, sides), {}};
  s.load.assign(s.mesh.boundary_edges.size(), {0.0, 0.0});
  for (std::size_t e = 0; e < s.mesh.boundary_edges.size(); ++e) {
    const auto& be = s.mesh.boundary_edges[e];
    if (s.mesh.nodes[be.nodes[0]].y() == 1.0 && s.mesh.nodes[be.nodes[1]].y() == 1.0) s.load[e] = {g, g};
  }
  return s;
}

}  // namespace

TEST_SUITE("deform") {
  TEST_CASE("strip solution is the analytic linear profile") {
    const double g = 0.7;
    const Strip s = make_strip(g);
    for (double p : {2.0, 3.0, 4.0, 6.0}) {
      CAPTURE(p);
      PLaplaceConfig cfg;
      cfg.p = p;
      cfg.eps_reg = 0.0;
      cfg.tolerance = 1e-12;
      PLaplaceStats stats;
      const auto u = solve_plaplace(s.mesh, s.load, cfg, std::nullopt, &stats);
      CHECK(stats.converged);
      // |s|^(p-2) s = -g
      const double slope = -std::pow(g, 1.0 / (p - 1.0));
      double err = 0.0;
      for (std::size_t i = 0; i < s.mesh.node_count(); ++i) {
        const Vec2& x = s.mesh.nodes[i];
        err = std::max(err, std::abs(u.u[i].y() - slope * x.y()));
        err = std::max(err, std::abs(u.u[i].x()));
      }
      CHECK(err < 1e-6);
    }
  }

  TEST_CASE("p = 2 matches the linear Laplace solve") {
    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    PLaplaceConfig cfg;
    cfg.p = 2.0;
    cfg.eps_reg = 0.0;
    CHECK(max_diff(solve_plaplace(m, g, cfg), solve_laplace(m, g)) <= 1e-8);
  }

  TEST_CASE("Laplace solve matches an independent P1 assembly") {
    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    const auto movable = deformable_nodes(m);
    std::vector<int> index(m.node_count(), -1);
    int n = 0;
    for (std::size_t i = 0; i < m.node_count(); ++i)
      if (movable[i]) index[i] = n++;

    // K_ij = |T| grad(l_i).grad(l_j), with grad(l_i) = rot90(x_k - x_j) / (2|T|)
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : m.triangles) {
      const double area = signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]);
      std::array<Vec2, 3> grad;
      for (int k = 0; k < 3; ++k) {
        const Vec2 e = m.nodes[t[(k + 2) % 3]] - m.nodes[t[(k + 1) % 3]];
        grad[k] = Vec2(-e.y(), e.x()) / (2.0 * area);
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (index[t[a]] >= 0 && index[t[b]] >= 0) K(index[t[a]], index[t[b]]) += area * grad[a].dot(grad[b]);
    }
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, 2);
    for (const auto& be : m.boundary_edges) {
      if (be.tag != BoundaryTag::Design) continue;
      const Vec2 normal = edge_normal(m, be);
      const double half = 0.5 * edge_length(m, be);
      for (int v : be.nodes) F.row(index[v]) += half * g.gamma[v] * normal.transpose();
    }
    const Eigen::MatrixXd U = K.ldlt().solve(-F);
    const auto u = solve_laplace(m, g);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < m.node_count(); ++i) {
      scale = std::max(scale, u.u[i].norm());
      if (index[i] >= 0) err = std::max(err, (u.u[i] - U.row(index[i]).transpose()).norm());
      else err = std::max(err, u.u[i].norm());
    }
    CHECK(scale > 0.0);
    CHECK(err < 1e-10 * scale);
  }

  TEST_CASE("edge load conversion gives the same direction") {
    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    PLaplaceConfig cfg;
    cfg.p = 3.0;
    CHECK(max_diff(solve_plaplace(m, g, cfg), solve_plaplace(m, edge_load(m, g), cfg)) < 1e-14);
  }

  TEST_CASE("energy at the minimizer follows from homogeneity") {
    // at the optimum int |grad u|^p = -l(u), so E = (1 - 1/p) l(u)
    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    for (double p : {2.0, 3.0, 4.0}) {
      CAPTURE(p);
      PLaplaceConfig cfg;
      cfg.p = p;
      cfg.eps_reg = 0.0;
      cfg.tolerance = 1e-12;
      const auto u = solve_plaplace(m, g, cfg);
      const double l = shape_derivative(m, g, u);
      CHECK(plaplace_energy(m, u, g, p, 0.0) == doctest::Approx((1.0 - 1.0 / p) * l).epsilon(1e-8));
      CHECK(l < 0.0);  // descent
    }
  }

  TEST_CASE("energy is monotone over Newton steps and below nearby fields") {
    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    PLaplaceConfig cfg;
    cfg.p = 4.0;
    PLaplaceStats stats;
    const auto u = solve_plaplace(m, g, cfg, std::nullopt, &stats);
    REQUIRE(!stats.energy_history.empty());
    for (std::size_t k = 1; k < stats.energy_history.size(); ++k)
      CHECK(stats.energy_history[k] <= stats.energy_history[k - 1]);
    const double e0 = plaplace_energy(m, u, g, cfg.p, cfg.eps_reg);
    CHECK(e0 == doctest::Approx(stats.energy).epsilon(1e-12));
    const auto movable = deformable_nodes(m);
    for (double scale : {0.9, 1.1}) {
      DeformationField v = u;
      for (auto& x : v.u) x *= scale;
      CHECK(plaplace_energy(m, v, g, cfg.p, cfg.eps_reg) > e0);
    }
    for (std::size_t i = 0; i < m.node_count(); ++i)
      if (!movable[i]) CHECK(u.u[i].norm() == 0.0);
  }

  TEST_CASE("zero load gives zero direction") {
    const Mesh m = testing::small_channel();
    SensitivityField g;
    g.nodes = design_nodes(m);
    g.gamma.assign(m.node_count(), 0.0);
    PLaplaceConfig cfg;
    cfg.p = 4.0;
    const auto u = solve_plaplace(m, g, cfg);
    for (const Vec2& x : u.u) CHECK(x.norm() == 0.0);
  }

  TEST_CASE("continuation schedule and warm start") {
    PLaplaceConfig cfg;
    cfg.p = 4.0;
    CHECK(continuation_schedule(cfg) == std::vector<double>{2.0, 3.0, 4.0});
    cfg.p = 3.5;
    CHECK(continuation_schedule(cfg) == std::vector<double>{2.0, 3.0, 3.5});
    cfg.p = 2.0;
    CHECK(continuation_schedule(cfg) == std::vector<double>{2.0});

    const Mesh m = testing::small_channel();
    const auto g = smooth_gamma(m);
    cfg.p = 4.0;
    PLaplaceStats cold, warm;
    const auto u = solve_plaplace(m, g, cfg, std::nullopt, &cold);
    solve_plaplace(m, g, cfg, u, &warm);
    CHECK(warm.iterations < cold.iterations);
    CHECK(warm.iterations <= 1);
  }

  TEST_CASE("config validation") {
    PLaplaceConfig cfg;
    cfg.p = 1.5;
    CHECK_THROWS_AS(check(cfg), std::invalid_argument);
    cfg.p = 4.0;
    cfg.eps_reg = -1.0;
    CHECK_THROWS_AS(check(cfg), std::invalid_argument);
    cfg.eps_reg = 0.0;
    cfg.schedule = {2.0, 3.0};
    CHECK_THROWS_AS(check(cfg), std::invalid_argument);
    cfg.schedule = {3.0, 2.0, 4.0};
    CHECK_THROWS_AS(check(cfg), std::invalid_argument);
    cfg.schedule = {2.0, 4.0};
    CHECK_NOTHROW(check(cfg));
  }
}
