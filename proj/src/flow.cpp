#include "pshape/flow.hpp"

#include <cmath>
#include <string>

#include <Eigen/SparseLU>

namespace pshape {

void check(const FluidProperties& props) {
  if (!(props.density >= 0.0)) throw std::invalid_argument("density must be >= 0");
  if (!(props.viscosity > 0.0)) throw std::invalid_argument("viscosity must be > 0");
  if (!(props.inflow.norm() > 0.0)) throw std::invalid_argument("inflow velocity must be nonzero");
}

void check(const SolverConfig& cfg) {
  if (!(cfg.nonlinear_tolerance > 0.0)) throw std::invalid_argument("nonlinear tolerance must be > 0");
  if (!(cfg.linear_tolerance > 0.0)) throw std::invalid_argument("linear tolerance must be > 0");
  if (cfg.max_picard_iterations < 1) throw std::invalid_argument("max Picard iterations must be >= 1");
  if (cfg.linear_max_iterations < 0) throw std::invalid_argument("linear max iterations must be >= 0");
}

fem::Triplets mixed_triplets(const Mesh& mesh, const MixedLayout& layout,
                             const FluidProperties& props, MixedOperator op,
                             const std::vector<Vec2>& coefficient) {
  const int nv = layout.velocity_nodes();
  const double mu = props.viscosity, rho = props.density;
  const bool adjoint = op == MixedOperator::Adjoint;
  const bool convective = rho != 0.0;
  fem::Triplets trip;
  trip.reserve(mesh.cell_count() * 225);

  // local unknowns: 0..5 vx, 6..11 vy, 12..14 p
  Eigen::Matrix<double, 15, 15> K;
  std::array<int, 15> dof;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto geom = fem::cell_geometry(mesh, c);
    const auto& nodes = layout.p2.cell_nodes[c];
    for (int a = 0; a < 6; ++a) {
      dof[a] = nodes[a];
      dof[6 + a] = nv + nodes[a];
    }
    for (int j = 0; j < 3; ++j) dof[12 + j] = 2 * nv + mesh.triangles[c][j];

    K.setZero();
    for (const auto& q : fem::triangle_rule()) {
      const double w = q.weight * geom.area;
      const auto basis = fem::p2_basis(geom, q.bary);
      const auto& phi = basis.value;
      const auto& dphi = basis.grad;
      Vec2 v = Vec2::Zero();
      Mat2 grad_v = Mat2::Zero();
      if (convective) {
        v = fem::p2_value(basis, nodes, coefficient);
        if (adjoint) grad_v = fem::p2_gradient(basis, nodes, coefficient);
      }
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double lap = mu * dphi[a].dot(dphi[b]);
          for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < 2; ++k) {
              double val = mu * dphi[a](k) * dphi[b](i);
              if (i == k) val += lap;
              K(6 * i + a, 6 * k + b) += w * val;
            }
          }
          if (convective) {
            const double adv = rho * phi[a] * v.dot(dphi[b]);
            if (adjoint) {
              for (int i = 0; i < 2; ++i) {
                K(6 * i + a, 6 * i + b) -= w * adv;
                for (int k = 0; k < 2; ++k)
                  K(6 * i + a, 6 * k + b) += w * rho * phi[a] * phi[b] * grad_v(k, i);
              }
            } else {
              K(a, b) += w * adv;
              K(6 + a, 6 + b) += w * adv;
            }
          }
        }
        for (int j = 0; j < 3; ++j) {
          const double psi = q.bary[j];
          for (int i = 0; i < 2; ++i) {
            const double div = -w * psi * dphi[a](i);
            K(6 * i + a, 12 + j) += div;
            K(12 + j, 6 * i + a) += div;
          }
        }
      }
    }
    for (int r = 0; r < 15; ++r)
      for (int s = 0; s < 15; ++s)
        if (K(r, s) != 0.0) trip.emplace_back(dof[r], dof[s], K(r, s));
  }

  if (adjoint && convective) {
    // rho (v.n) vh.w on the outflow boundary
    for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
      const auto& be = mesh.boundary_edges[e];
      if (be.tag != BoundaryTag::Outflow) continue;
      const int cell = layout.p2.boundary_edge_cell[e];
      const int local = layout.p2.boundary_edge_local[e];
      const auto geom = fem::cell_geometry(mesh, cell);
      const auto& nodes = layout.p2.cell_nodes[cell];
      const Vec2 n = edge_normal(mesh, be);
      const double len = edge_length(mesh, be);
      Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
      for (const auto& q : fem::line_rule()) {
        const auto basis = fem::p2_basis(geom, fem::edge_point(local, q.s));
        const double flux = rho * fem::p2_value(basis, nodes, coefficient).dot(n);
        for (int a = 0; a < 6; ++a)
          for (int b = 0; b < 6; ++b) M(a, b) += q.weight * len * flux * basis.value[a] * basis.value[b];
      }
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
          if (M(a, b) == 0.0) continue;
          trip.emplace_back(nodes[a], nodes[b], M(a, b));
          trip.emplace_back(nv + nodes[a], nv + nodes[b], M(a, b));
        }
    }
  }
  return trip;
}

fem::SparseMatrix mixed_operator(const Mesh& mesh, const MixedLayout& layout,
                                 const FluidProperties& props, MixedOperator op,
                                 const std::vector<Vec2>& coefficient) {
  const auto trip = mixed_triplets(mesh, layout, props, op, coefficient);
  fem::SparseMatrix A(layout.size(), layout.size());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

LinearSystem constrained_system(const fem::Triplets& triplets, const MixedLayout& layout,
                                const fem::VelocityConstraints& bc) {
  const int n = layout.size();
  const int nv = layout.velocity_nodes();
  std::vector<char> fixed(n, 0);
  LinearSystem sys;
  sys.rhs = Eigen::VectorXd::Zero(n);
  fem::Triplets trip;
  trip.reserve(triplets.size() + 2 * nv);
  for (int i = 0; i < nv; ++i) {
    if (bc.x[i]) {
      fixed[i] = 1;
      sys.rhs[i] = *bc.x[i];
      trip.emplace_back(i, i, 1.0);
    }
    if (bc.y[i]) {
      fixed[nv + i] = 1;
      sys.rhs[nv + i] = *bc.y[i];
      trip.emplace_back(nv + i, nv + i, 1.0);
    }
  }
  for (const auto& t : triplets)
    if (!fixed[t.row()]) trip.push_back(t);
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

Eigen::VectorXd solve_linear(const LinearSystem& system, const SolverConfig& cfg) {
  Eigen::SparseLU<fem::SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(system.matrix);
  lu.factorize(system.matrix);
  if (lu.info() != Eigen::Success) throw SolverError("linear solver breakdown: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(system.rhs);
  const double scale = std::max(system.rhs.norm(), 1e-300);
  double res = (system.rhs - system.matrix * x).norm() / scale;
  for (int it = 0; it < cfg.linear_max_iterations && res > cfg.linear_tolerance; ++it) {
    x += lu.solve(system.rhs - system.matrix * x);
    res = (system.rhs - system.matrix * x).norm() / scale;
  }
  if (!std::isfinite(res) || (res > cfg.linear_tolerance && system.rhs.norm() > 0.0))
    throw SolverError("linear solver residual " + std::to_string(res) + " above tolerance", res);
  return x;
}

Eigen::VectorXd pack(const MixedLayout& layout, const std::vector<Vec2>& velocity,
                     const std::vector<double>& pressure) {
  const int nv = layout.velocity_nodes();
  Eigen::VectorXd x(layout.size());
  for (int i = 0; i < nv; ++i) {
    x[i] = velocity[i].x();
    x[nv + i] = velocity[i].y();
  }
  for (int j = 0; j < layout.pressure_nodes(); ++j) x[2 * nv + j] = pressure[j];
  return x;
}

void unpack(const MixedLayout& layout, const Eigen::VectorXd& x, std::vector<Vec2>& velocity,
            std::vector<double>& pressure) {
  const int nv = layout.velocity_nodes();
  velocity.resize(nv);
  pressure.resize(layout.pressure_nodes());
  for (int i = 0; i < nv; ++i) velocity[i] = Vec2(x[i], x[nv + i]);
  for (int j = 0; j < layout.pressure_nodes(); ++j) pressure[j] = x[2 * nv + j];
}

FlowState solve_primal(const Mesh& mesh, const FluidProperties& props, const SolverConfig& cfg,
                       const std::optional<FlowState>& warm_start) {
  check(props);
  check(cfg);
  MixedLayout layout{fem::build_p2_layout(mesh)};
  const auto bc = fem::velocity_constraints(mesh, layout.p2, Vec2::Zero(), props.inflow);

  FlowState state;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  if (warm_start && static_cast<int>(warm_start->velocity.size()) == layout.velocity_nodes() &&
      static_cast<int>(warm_start->pressure.size()) == layout.pressure_nodes()) {
    x = pack(layout, warm_start->velocity, warm_start->pressure);
  }
  std::vector<Vec2> w(layout.velocity_nodes(), Vec2::Zero());
  std::vector<double> p;
  unpack(layout, x, w, p);

  for (int it = 0;; ++it) {
    const auto sys = constrained_system(
        mixed_triplets(mesh, layout, props, MixedOperator::Oseen, w), layout, bc);
    const double res = (sys.matrix * x - sys.rhs).norm() / std::max(sys.rhs.norm(), 1e-300);
    state.residual_history.push_back(res);
    state.residual_norm = res;
    if (res < cfg.nonlinear_tolerance) break;
    if (!std::isfinite(res)) throw SolverError("flow solve diverged", res);
    if (it == cfg.max_picard_iterations)
      throw SolverError("Picard iteration did not converge, residual " + std::to_string(res), res);
    x = solve_linear(sys, cfg);
    unpack(layout, x, w, p);
    state.picard_iterations = it + 1;
  }
  unpack(layout, x, state.velocity, state.pressure);
  return state;
}

Vec2 force(const Mesh& mesh, const FlowState& state, const FluidProperties& props) {
  const auto layout = fem::build_p2_layout(mesh);
  Vec2 f = Vec2::Zero();
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::Design) continue;
    const int cell = layout.boundary_edge_cell[e];
    const int local = layout.boundary_edge_local[e];
    const auto geom = fem::cell_geometry(mesh, cell);
    const auto& nodes = layout.cell_nodes[cell];
    const Vec2 n = edge_normal(mesh, be);
    const double len = edge_length(mesh, be);
    for (const auto& q : fem::line_rule()) {
      const auto bary = fem::edge_point(local, q.s);
      const auto basis = fem::p2_basis(geom, bary);
      const Mat2 g = fem::p2_gradient(basis, nodes, state.velocity);
      const double p = fem::p1_value(mesh.triangles[cell], state.pressure, bary);
      const Mat2 sigma = props.viscosity * (g + g.transpose()) - p * Mat2::Identity();
      f += q.weight * len * (sigma * n);
    }
  }
  return f;
}

Vec2 reaction_force(const Mesh& mesh, const FlowState& state, const FluidProperties& props) {
  MixedLayout layout{fem::build_p2_layout(mesh)};
  const auto A = mixed_operator(mesh, layout, props, MixedOperator::Oseen, state.velocity);
  const Eigen::VectorXd r = A * pack(layout, state.velocity, state.pressure);
  const int nv = layout.velocity_nodes();
  std::vector<char> on_design(nv, 0);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::Design) continue;
    on_design[be.nodes[0]] = on_design[be.nodes[1]] = on_design[layout.p2.boundary_edge_node[e]] = 1;
  }
  Vec2 f = Vec2::Zero();
  for (int i = 0; i < nv; ++i)
    if (on_design[i]) f += Vec2(r[i], r[nv + i]);
  return f;
}

double drag(const Vec2& f, const FluidProperties& props) {
  return -props.inflow.normalized().dot(f);
}

ObjectiveValue objective(const Mesh& mesh, const FlowState& state, const FluidProperties& props,
                         const AugLagState& al) {
  ObjectiveValue out;
  out.drag = drag(reaction_force(mesh, state, props), props);
  const Vec2 b = barycenter_residual(mesh, al);
  const double c = volume_residual(mesh, al);
  out.barycenter_penalty = 0.5 * al.rho_b * b.squaredNorm();
  out.volume_penalty = 0.5 * al.rho_c * c * c;
  out.total = out.drag + out.barycenter_penalty + out.volume_penalty;
  return out;
}

}  // namespace pshape
