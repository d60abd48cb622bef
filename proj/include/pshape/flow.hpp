#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pshape/auglag.hpp"
#include "pshape/fem.hpp"
#include "pshape/mesh.hpp"

namespace pshape {

struct FluidProperties {
  double density = 1.0;
  double viscosity = 1.0;
  Vec2 inflow = Vec2(1.0, 0.0);
};

/// Throws std::invalid_argument unless density >= 0, viscosity > 0 and the
/// inflow is nonzero. Density 0 gives the Stokes problem.
void check(const FluidProperties& props);

struct SolverConfig {
  double nonlinear_tolerance = 1e-10;
  int max_picard_iterations = 50;
  double linear_tolerance = 1e-10;
  int linear_max_iterations = 5;  // iterative refinement sweeps after the LU solve
};

void check(const SolverConfig& cfg);

/// Quadratic velocity on the P2 nodes of fem::build_p2_layout, linear
/// pressure on the mesh vertices.
struct FlowState {
  std::vector<Vec2> velocity;
  std::vector<double> pressure;
  double residual_norm = 0.0;
  int picard_iterations = 0;
  std::vector<double> residual_history;
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

FlowState solve_primal(const Mesh& mesh, const FluidProperties& props, const SolverConfig& cfg,
                       const std::optional<FlowState>& warm_start = std::nullopt);

/// Total force on the Design boundary, n pointing out of the fluid, from the
/// boundary stress of the FE solution.
Vec2 force(const Mesh& mesh, const FlowState& state, const FluidProperties& props);

/// The same force from the weak momentum residual tested with a field that
/// is 1 on the Design nodes and 0 elsewhere. Converges faster than the
/// boundary integral and is what the objective uses.
Vec2 reaction_force(const Mesh& mesh, const FlowState& state, const FluidProperties& props);

struct ObjectiveValue {
  double total = 0.0;
  double drag = 0.0;
  double barycenter_penalty = 0.0;
  double volume_penalty = 0.0;
};

/// Drag from reaction_force plus the two constraint penalties.
ObjectiveValue objective(const Mesh& mesh, const FlowState& state, const FluidProperties& props,
                         const AugLagState& al);

/// Drag part of the objective for a given force.
double drag(const Vec2& force, const FluidProperties& props);

// Lower level pieces shared with the adjoint solver.

enum class MixedOperator {
  Oseen,    // viscous + rho (w.grad)v + pressure/continuity, w frozen
  Adjoint,  // viscous - rho (v.grad)vh + rho grad(v)^T vh + outflow flux term
};

/// Unknown ordering: [vx on P2 nodes, vy on P2 nodes, p on vertices].
struct MixedLayout {
  fem::P2Layout p2;
  int velocity_nodes() const { return p2.node_count(); }
  int pressure_nodes() const { return p2.vertex_count; }
  int size() const { return 2 * velocity_nodes() + pressure_nodes(); }
};

/// Element contributions of the operator, no boundary conditions applied.
fem::Triplets mixed_triplets(const Mesh& mesh, const MixedLayout& layout,
                             const FluidProperties& props, MixedOperator op,
                             const std::vector<Vec2>& coefficient);

/// Matrix without boundary conditions.
fem::SparseMatrix mixed_operator(const Mesh& mesh, const MixedLayout& layout,
                                 const FluidProperties& props, MixedOperator op,
                                 const std::vector<Vec2>& coefficient);

struct LinearSystem {
  fem::SparseMatrix matrix;
  Eigen::VectorXd rhs;
};

/// Replaces constrained velocity rows by identity rows carrying the data.
LinearSystem constrained_system(const fem::Triplets& triplets, const MixedLayout& layout,
                                const fem::VelocityConstraints& bc);

/// Sparse LU with iterative refinement; throws SolverError when the relative
/// residual stays above cfg.linear_tolerance.
Eigen::VectorXd solve_linear(const LinearSystem& system, const SolverConfig& cfg);

Eigen::VectorXd pack(const MixedLayout& layout, const std::vector<Vec2>& velocity,
                     const std::vector<double>& pressure);
void unpack(const MixedLayout& layout, const Eigen::VectorXd& x, std::vector<Vec2>& velocity,
            std::vector<double>& pressure);

}  // namespace pshape
