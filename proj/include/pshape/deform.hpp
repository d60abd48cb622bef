#pragma once

#include <array>
#include <optional>
#include <vector>

#include "pshape/sensitivity.hpp"

namespace pshape {

struct PLaplaceConfig {
  double p = 4.0;
  double eps_reg = 1e-10;
  double tolerance = 1e-10;  // on ||grad E|| / ||load||
  int max_iterations = 100;  // Newton iterations per continuation stage
  std::vector<double> schedule;  // empty: 2, 3, ..., p
  double continuation_tolerance = 1e-4;
};

/// Throws std::invalid_argument on p < 2, negative regularization, a
/// non-increasing schedule or one that does not end at p.
void check(const PLaplaceConfig& cfg);

/// Exponents actually visited when starting cold.
std::vector<double> continuation_schedule(const PLaplaceConfig& cfg);

struct PLaplaceStats {
  bool converged = true;
  int iterations = 0;        // Newton iterations over all stages
  int final_iterations = 0;  // Newton iterations at the target p
  double energy = 0.0;
  double residual = 0.0;
  std::vector<double> energy_history;  // after each accepted step at the target p
};

/// Per boundary edge, the load values at its two end nodes (only Design
/// edges are read). Lets callers prescribe data that jumps at corners.
using EdgeLoad = std::vector<std::array<double, 2>>;

EdgeLoad edge_load(const Mesh& mesh, const SensitivityField& gamma);

/// Minimizes (1/p) sum_T |T| (eps + G:G)^{p/2} + shape_derivative(gamma, u)
/// over P1 fields vanishing on non-Design boundary nodes, by damped Newton
/// with continuation in p. Without a warm start the solve begins at p = 2;
/// with one it goes straight to the target p. On non-convergence the best
/// iterate is returned and stats->converged is false.
DeformationField solve_plaplace(const Mesh& mesh, const SensitivityField& gamma,
                                const PLaplaceConfig& cfg,
                                const std::optional<DeformationField>& warm_start = std::nullopt,
                                PLaplaceStats* stats = nullptr);

DeformationField solve_plaplace(const Mesh& mesh, const EdgeLoad& load, const PLaplaceConfig& cfg,
                                const std::optional<DeformationField>& warm_start = std::nullopt,
                                PLaplaceStats* stats = nullptr);

/// Linear vector Laplace problem with the same load and boundary conditions.
DeformationField solve_laplace(const Mesh& mesh, const SensitivityField& gamma);
DeformationField solve_laplace(const Mesh& mesh, const EdgeLoad& load);

double plaplace_energy(const Mesh& mesh, const DeformationField& u, const SensitivityField& gamma,
                       double p, double eps_reg);
double plaplace_energy(const Mesh& mesh, const DeformationField& u, const EdgeLoad& load, double p,
                       double eps_reg);

/// Nodes that may move: vertices not on any non-Design boundary edge.
std::vector<char> deformable_nodes(const Mesh& mesh);

}  // namespace pshape
