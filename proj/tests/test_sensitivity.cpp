#include <doctest.h>

#include <cmath>
#include <random>

#include "pshape/sensitivity.hpp"
#include "support.hpp"

using namespace pshape;

namespace {

// random displacement on Design nodes, zero elsewhere
DeformationField design_bump(const Mesh& mesh, unsigned seed, double scale) {
  DeformationField u;
  u.u.assign(mesh.node_count(), Vec2::Zero());
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  for (int v : design_nodes(mesh)) u.u[v] = Vec2(U(rng), U(rng));
  return u;
}

SensitivityField constant_gamma(const Mesh& mesh, double value) {
  SensitivityField g;
  g.nodes = design_nodes(mesh);
  g.gamma.assign(mesh.node_count(), 0.0);
  for (int v : g.nodes) g.gamma[v] = value;
  return g;
}

struct Solved {
  FlowState flow;
  AdjointState adj;
};

Solved solve(const Mesh& m, const FluidProperties& props) {
  const SolverConfig cfg;
  Solved s{solve_primal(m, props, cfg), {}};
  s.adj = solve_adjoint(m, s.flow, props, cfg);
  return s;
}

}  // namespace

TEST_SUITE("sensitivity") {
  TEST_CASE("unit density integrates the volume derivative exactly") {
    const Mesh m = testing::small_channel();
    const auto u = design_bump(m, 3, 1.0);
    const double t = 1e-3;
    const double fd = (volume(morph(m, u.u, t)) - volume(morph(m, u.u, -t))) / (2 * t);
    CHECK(shape_derivative(m, constant_gamma(m, 1.0), u) == doctest::Approx(fd).epsilon(1e-9));
  }

  TEST_CASE("constant density has no derivative along a translation") {
    const Mesh m = testing::small_channel();
    DeformationField u;
    u.u.assign(m.node_count(), Vec2(0.3, -0.8));
    CHECK(std::abs(shape_derivative(m, constant_gamma(m, 2.5), u)) < 1e-13);
  }

  TEST_CASE("constraint terms match the derivative of the penalties") {
    const Mesh m = generate_channel_mesh(ChannelSpec{});
    const FluidProperties props;
    const Solved s = solve(m, props);

    AugLagState base;
    base.target_b = barycenter(m);
    base.target_volume = volume(m);
    AugLagState al = base;
    al.lambda_b = Vec2(-3.0, 0.5);
    al.lambda_c = 1.2;
    al.rho_b = 40.0;
    al.rho_c = 7.0;
    al.target_b = barycenter(m) + Vec2(2e-3, -1e-3);
    al.target_volume = volume(m) - 0.05;

    const auto g_all = shape_sensitivity(m, s.flow, s.adj, props, al);
    const auto g_flow = shape_sensitivity(m, s.flow, s.adj, props, base);

    // pointwise formula
    const double V = volume(m);
    const Vec2 beta = barycenter(m);
    const Vec2 b = beta - al.target_b;
    const double c = V - al.target_volume;
    SensitivityField diff = g_all;
    for (int v : diff.nodes) {
      diff.gamma[v] = g_all.gamma[v] - g_flow.gamma[v];
      const Vec2 r = m.nodes[v] - beta;
      const double expected = al.lambda_b.dot(r) / V + al.lambda_c + al.rho_b * b.dot(r) / V + al.rho_c * c;
      CHECK(diff.gamma[v] == doctest::Approx(expected).epsilon(1e-10));
    }

    // against a central difference of the penalty functional
    auto penalty = [&](const Mesh& mm) {
      const Vec2 bb = barycenter_residual(mm, al);
      const double cc = volume_residual(mm, al);
      return al.lambda_b.dot(bb) + al.lambda_c * cc + 0.5 * al.rho_b * bb.squaredNorm() + 0.5 * al.rho_c * cc * cc;
    };
    DeformationField u;
    u.u = design_normals(m);
    const double t = 1e-4;
    const double fd = (penalty(morph(m, u.u, t)) - penalty(morph(m, u.u, -t))) / (2 * t);
    CHECK(shape_derivative(m, diff, u) == doctest::Approx(fd).epsilon(2e-3));
  }

  TEST_CASE("negative sensitivity direction is a descent direction") {
    const Mesh m = testing::small_channel();
    const FluidProperties props;
    const Solved s = solve(m, props);
    AugLagState al;
    al.target_volume = volume(m);
    const auto g = shape_sensitivity(m, s.flow, s.adj, props, al);
    const auto normals = design_normals(m);
    DeformationField u;
    u.u.assign(m.node_count(), Vec2::Zero());
    for (int v : g.nodes) u.u[v] = -g.gamma[v] * normals[v];
    CHECK(shape_derivative(m, g, u) < 0.0);

    const auto on_design = design_nodes(m);
    for (std::size_t i = 0; i < g.gamma.size(); ++i)
      if (!std::binary_search(on_design.begin(), on_design.end(), static_cast<int>(i))) CHECK(g.gamma[i] == 0.0);
  }

  TEST_CASE("drag sensitivity matches finite differences for node bumps") {
    const Mesh m = testing::small_channel();
    const FluidProperties props;
    const Solved s = solve(m, props);
    AugLagState al;
    al.rho_b = al.rho_c = 1e-300;  // drag only
    al.target_b = barycenter(m);
    al.target_volume = volume(m);
    const auto g = shape_sensitivity(m, s.flow, s.adj, props, al);
    const auto normals = design_normals(m);
    SolverConfig tight;
    tight.nonlinear_tolerance = 1e-12;
    tight.linear_tolerance = 1e-12;
    auto J = [&](const Mesh& mm) { return drag(reaction_force(mm, solve_primal(mm, props, tight), props), props); };
    for (int node : {g.nodes[1], g.nodes[4]}) {
      DeformationField u;
      u.u.assign(m.node_count(), Vec2::Zero());
      u.u[node] = normals[node];
      const double h = 1e-5;
      const double fd = (J(morph(m, u.u, h)) - J(morph(m, u.u, -h))) / (2 * h);
      CHECK(shape_derivative(m, g, u) == doctest::Approx(fd).epsilon(2e-2));
    }
  }
}
