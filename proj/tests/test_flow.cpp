#include <doctest.h>

#include <cmath>
#include <random>

#include "pshape/adjoint.hpp"
#include "support.hpp"

using namespace pshape;

namespace {

const std::array<BoundaryTag, 4> kChannelSides{BoundaryTag::SlipWall, BoundaryTag::Outflow, BoundaryTag::SlipWall,
                                               BoundaryTag::Inflow};

Eigen::VectorXd velocity_vector(const MixedLayout& layout, const std::vector<Vec2>& v) {
  return pack(layout, v, std::vector<double>(layout.pressure_nodes(), 0.0));
}

// P2 interpolant of an affine field x -> g + G x
std::vector<Vec2> affine_field(const Mesh& mesh, const MixedLayout& layout, const Mat2& G, const Vec2& g) {
  std::vector<Vec2> v;
  for (const Vec2& x : fem::p2_node_positions(mesh, layout.p2)) v.push_back(g + G * x);
  return v;
}

std::vector<char> boundary_p2_nodes(const Mesh& mesh, const MixedLayout& layout) {
  std::vector<char> on(layout.velocity_nodes(), 0);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    on[mesh.boundary_edges[e].nodes[0]] = on[mesh.boundary_edges[e].nodes[1]] = 1;
    on[layout.p2.boundary_edge_node[e]] = 1;
  }
  return on;
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("viscous block reproduces the strain energy of an affine field") {
    const Mesh m = generate_rectangle_mesh({0, 0}, {2, 1}, 3, 2, kChannelSides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    FluidProperties props;
    props.density = 0.0;
    props.viscosity = 1.7;
    const auto A = mixed_operator(m, layout, props, MixedOperator::Oseen, {});
    Mat2 G;
    G << 0.3, -1.1, 0.7, 0.4;
    const auto x = velocity_vector(layout, affine_field(m, layout, G, Vec2(2, 3)));
    // mu int (grad v : grad v + grad v : grad v^T)
    const double expected = props.viscosity * 2.0 * (G.squaredNorm() + (G * G).trace());
    CHECK(x.dot(A * x) == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("pressure block is minus the divergence moment") {
    const Mesh m = generate_rectangle_mesh({0, 0}, {2, 1}, 3, 2, kChannelSides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    FluidProperties props;
    props.density = 0.0;
    const auto A = mixed_operator(m, layout, props, MixedOperator::Oseen, {});
    Mat2 G;
    G << 0.3, -1.1, 0.7, 0.4;
    const auto v = velocity_vector(layout, affine_field(m, layout, G, Vec2::Zero()));
    // q = 1 + x - 2y, mean over [0,2]x[0,1] is 1 + 1 - 1 = 1
    std::vector<double> q;
    for (const Vec2& x : m.nodes) q.push_back(1.0 + x.x() - 2.0 * x.y());
    const auto qv = pack(layout, std::vector<Vec2>(layout.velocity_nodes(), Vec2::Zero()), q);
    CHECK(qv.dot(A * v) == doctest::Approx(-G.trace() * 2.0 * 1.0).epsilon(1e-12));
    CHECK(v.dot(A * qv) == doctest::Approx(-G.trace() * 2.0 * 1.0).epsilon(1e-12));
  }

  TEST_CASE("convection block with a constant transport field") {
    const Mesh m = generate_rectangle_mesh({0, 0}, {2, 1}, 3, 2, kChannelSides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    FluidProperties props;
    props.density = 2.5;
    const Vec2 c(0.6, -0.2);
    const auto A = mixed_operator(m, layout, props, MixedOperator::Oseen,
                                  std::vector<Vec2>(layout.velocity_nodes(), c));
    Mat2 G;
    G << 0.3, -1.1, 0.7, 0.4;
    const Vec2 e(0.8, 1.3);
    const auto u = velocity_vector(layout, affine_field(m, layout, G, Vec2::Zero()));
    const auto w = velocity_vector(layout, std::vector<Vec2>(layout.velocity_nodes(), e));
    CHECK(w.dot(A * u) == doctest::Approx(props.density * 2.0 * e.dot(G * c)).epsilon(1e-12));
  }

  TEST_CASE("Stokes operator is its own adjoint") {
    const Mesh m = generate_rectangle_mesh({0, 0}, {2, 1}, 2, 2, kChannelSides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    REQUIRE(layout.size() <= 100);
    FluidProperties props;
    props.density = 0.0;
    const fem::SparseMatrix A = mixed_operator(m, layout, props, MixedOperator::Oseen, {});
    const fem::SparseMatrix B = mixed_operator(m, layout, props, MixedOperator::Adjoint, {});
    const Eigen::MatrixXd a(A), b(B);
    CHECK((a - b.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
  }

  TEST_CASE("adjoint operator transposes the linearized convection for a divergence-free field") {
    const Mesh m = generate_rectangle_mesh({-1, -1}, {1, 1}, 4, 4, kChannelSides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    FluidProperties props;
    props.density = 1.3;
    Mat2 G;
    G << 1.0, 0.0, 0.0, -1.0;  // v = (x, -y), div v = 0
    const auto v = affine_field(m, layout, G, Vec2::Zero());
    const auto oseen = mixed_operator(m, layout, props, MixedOperator::Oseen, v);
    const auto adj = mixed_operator(m, layout, props, MixedOperator::Adjoint, v);

    const auto boundary = boundary_p2_nodes(m, layout);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<Vec2> xf(layout.velocity_nodes(), Vec2::Zero()), yf = xf;
    for (int i = 0; i < layout.velocity_nodes(); ++i)
      if (!boundary[i]) {
        xf[i] = Vec2(U(rng), U(rng));
        yf[i] = Vec2(U(rng), U(rng));
      }
    const auto x = velocity_vector(layout, xf), y = velocity_vector(layout, yf);

    // rho int ((x.grad) v).y by quadrature
    double n = 0.0;
    for (std::size_t c = 0; c < m.cell_count(); ++c) {
      const auto geom = fem::cell_geometry(m, c);
      for (const auto& q : fem::triangle_rule()) {
        const auto basis = fem::p2_basis(geom, q.bary);
        const auto& nodes = layout.p2.cell_nodes[c];
        n += q.weight * geom.area * props.density *
             (G * fem::p2_value(basis, nodes, xf)).dot(fem::p2_value(basis, nodes, yf));
      }
    }
    const double lhs = x.dot(adj * y);
    const double rhs = y.dot(oseen * x) + n;
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }

  TEST_CASE("uniform flow is reproduced exactly") {
    const Mesh m = generate_rectangle_mesh({0, -1}, {6, 1}, 8, 4, kChannelSides);
    FluidProperties props;
    props.inflow = Vec2(1.5, 0.0);
    const FlowState s = solve_primal(m, props, SolverConfig{});
    for (const Vec2& v : s.velocity) CHECK((v - props.inflow).norm() < 1e-12);
    CHECK(testing::max_abs(s.pressure) < 1e-10);
  }

  TEST_CASE("symmetric channel gives no lift") {
    const Mesh m = testing::small_channel();
    const FluidProperties props;
    const FlowState s = solve_primal(m, props, SolverConfig{});
    CHECK(s.residual_norm < 1e-10);
    const Vec2 fr = reaction_force(m, s, props);
    const Vec2 fb = force(m, s, props);
    CHECK(std::abs(fr.y()) < 1e-8 * std::abs(fr.x()));
    CHECK(std::abs(fb.y()) < 1e-8 * std::abs(fb.x()));
    CHECK(drag(fr, props) > 0.0);
    // both force evaluations approximate the same integral
    CHECK(std::abs(fb.x() - fr.x()) < 0.1 * std::abs(fr.x()));
  }

  TEST_CASE("force of a manufactured shear state") {
    // v = (a y, 0), p = c on [0,2]x[0,1]; the Design wall is y = 0 with n = (0,-1)
    const std::array<BoundaryTag, 4> sides{BoundaryTag::Design, BoundaryTag::Outflow, BoundaryTag::Inflow,
                                           BoundaryTag::Outflow};
    const Mesh m = generate_rectangle_mesh({0, 0}, {2, 1}, 4, 4, sides);
    const MixedLayout layout{fem::build_p2_layout(m)};
    FluidProperties props;
    props.viscosity = 1.4;
    const double a = 0.8, c = 0.35;
    FlowState s;
    for (const Vec2& x : fem::p2_node_positions(m, layout.p2)) s.velocity.push_back(Vec2(a * x.y(), 0.0));
    s.pressure.assign(m.node_count(), c);
    const Vec2 expected(-2.0 * props.viscosity * a, 2.0 * c);
    CHECK((force(m, s, props) - expected).norm() < 1e-12);
    CHECK((reaction_force(m, s, props) - expected).norm() < 1e-12);
  }

  TEST_CASE("Picard history and warm start") {
    const Mesh m = testing::small_channel();
    const FluidProperties props;
    const FlowState cold = solve_primal(m, props, SolverConfig{});
    CHECK(cold.residual_history.size() == static_cast<std::size_t>(cold.picard_iterations + 1));
    CHECK(cold.residual_history.back() < 1e-10);
    const FlowState warm = solve_primal(m, props, SolverConfig{}, cold);
    CHECK(warm.picard_iterations <= 1);
  }

  TEST_CASE("bad parameters and non-convergence") {
    const Mesh m = testing::small_channel();
    FluidProperties bad;
    bad.viscosity = 0.0;
    CHECK_THROWS_AS(solve_primal(m, bad, SolverConfig{}), std::invalid_argument);
    bad = FluidProperties{};
    bad.density = -1.0;
    CHECK_THROWS_AS(check(bad), std::invalid_argument);
    SolverConfig tight;
    tight.max_picard_iterations = 1;
    tight.nonlinear_tolerance = 1e-14;
    CHECK_THROWS_AS(solve_primal(m, FluidProperties{}, tight), SolverError);
  }
}

TEST_SUITE("adjoint") {
  TEST_CASE("Stokes adjoint equals primal minus the far field") {
    // linearity: vh = U(-e, 0) = U(0, e) - U(e, e) = v - e, same pressure
    const Mesh m = testing::small_channel();
    FluidProperties props;
    props.density = 0.0;
    const SolverConfig cfg;
    const FlowState v = solve_primal(m, props, cfg);
    const AdjointState a = solve_adjoint(m, v, props, cfg);
    double dv = 0.0, dp = 0.0;
    for (std::size_t i = 0; i < v.velocity.size(); ++i)
      dv = std::max(dv, (a.velocity[i] - (v.velocity[i] - props.inflow)).norm());
    for (std::size_t i = 0; i < v.pressure.size(); ++i) dp = std::max(dp, std::abs(a.pressure[i] - v.pressure[i]));
    CHECK(dv < 1e-9);
    CHECK(dp < 1e-9 * std::max(1.0, testing::max_abs(v.pressure)));
  }

  TEST_CASE("Navier-Stokes adjoint solve and guards") {
    const Mesh m = testing::small_channel();
    const FluidProperties props;
    const SolverConfig cfg;
    const FlowState v = solve_primal(m, props, cfg);
    const AdjointState a = solve_adjoint(m, v, props, cfg);
    CHECK(a.residual_norm < cfg.linear_tolerance);
    const Vec2 e = props.inflow.normalized();
    for (int n : design_nodes(m)) CHECK((a.velocity[n] + e).norm() < 1e-14);

    const auto lambda = boundary_traction_multiplier(m, a, props);
    const auto on_design = design_nodes(m);
    for (std::size_t i = 0; i < lambda.size(); ++i)
      if (!std::binary_search(on_design.begin(), on_design.end(), static_cast<int>(i)))
        CHECK(lambda[i].norm() == 0.0);

    FlowState loose = v;
    loose.residual_norm = 1e-3;
    CHECK_THROWS_AS(solve_adjoint(m, loose, props, cfg), SolverError);
    FlowState wrong = v;
    wrong.velocity.pop_back();
    CHECK_THROWS_AS(solve_adjoint(m, wrong, props, cfg), SolverError);
  }
}
