#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pshape/deform.hpp"

namespace pshape {

/// Physical parameters plus the configs of the three solvers.
struct SolverSuite {
  FluidProperties fluid;
  SolverConfig flow;
  PLaplaceConfig plaplace;
};

struct OptimizerConfig {
  AugLagState al;  // initial multipliers, penalties, targets, tolerances, step size
  std::vector<double> eps_sequence{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
  int max_design_steps = 600;  // per inner loop
  int max_outer_steps = 20;
  int max_total_steps = 0;  // mesh updates over the whole run, 0 = unlimited
  int max_step_retries = 5;  // step halvings after an inverted cell
};

void check(const OptimizerConfig& cfg);

/// One row per objective evaluation.
struct HistoryRecord {
  int row = 0;        // contiguous over the run
  int outer = 0;      // augmented Lagrange step
  int inner = 0;      // design step within the inner loop
  int mesh_step = 0;  // mesh updates applied so far
  double J = 0.0;
  double J_ratio = 0.0;
  double drag = 0.0;
  double barycenter_penalty = 0.0;
  double volume_penalty = 0.0;
  double b_norm = 0.0;
  double c_abs = 0.0;
  double gamma_max = 0.0;   // NaN when no direction was computed on this row
  double energy = 0.0;      // p-Laplace energy of the direction, NaN as above
  double derivative = 0.0;  // shape derivative along the direction, NaN as above
  double step_size = 0.0;   // step actually applied, 0 when none
  int retries = 0;
  int picard_iterations = 0;
  int newton_iterations = 0;
  double max_aspect_ratio = 0.0;
  double min_angle = 0.0;
  double tip_angle = 0.0;
  double half_axis_ratio = 0.0;
  double wall_time = 0.0;  // seconds since the run started
};

using History = std::vector<HistoryRecord>;

/// Per outer step: state after the multiplier update.
struct OuterRecord {
  int outer = 0;
  double eps = 0.0;
  double J = 0.0;
  Vec2 b = Vec2::Zero();
  double c = 0.0;
  AugLagState al;
};

enum class LoopStatus { Converged, StepLimit, StepBudget, MeshQualityFailure };

std::string to_string(LoopStatus status);

/// What an observer sees after each row is complete. gamma and direction are
/// null on rows where the loop stopped before computing them.
struct StepView {
  const HistoryRecord& record;
  const Mesh& mesh;
  const FlowState& flow;
  const SensitivityField* gamma;
  const DeformationField* direction;
};

using Observer = std::function<void(const StepView&)>;

/// State shared across inner loops of one run: the cached J0, counters, warm
/// starts and the observer.
struct RunContext {
  std::optional<double> J0;
  int rows = 0;
  int mesh_steps = 0;
  int outer = 0;
  int max_total_steps = 0;
  int max_step_retries = 5;
  std::optional<FlowState> flow_warm;
  std::optional<DeformationField> direction_warm;
  Observer observer;
  double start_time = -1.0;
};

struct ShapeLoopResult {
  Mesh mesh;
  History history;
  LoopStatus status = LoopStatus::Converged;
  double J = 0.0;
};

/// Inner loop: primal, adjoint, gamma, p-Laplace, morph, until consecutive
/// objectives differ by less than eps |J0| or max_design_steps updates were made.
ShapeLoopResult run_shape_loop(const Mesh& mesh, const AugLagState& al, double eps,
                               const SolverSuite& solvers, int max_design_steps, RunContext& ctx);

/// Penalty growth when a constraint is violated beyond its tolerance,
/// multiplier update otherwise; barycenter and volume independently.
AugLagState update_multipliers(const AugLagState& al, const Vec2& b, double c);

struct AugLagResult {
  Mesh mesh;
  History history;
  AugLagState al;
  std::vector<OuterRecord> outer;
  LoopStatus status = LoopStatus::Converged;
};

/// Outer loop. Once the tolerance sequence is used up, stops when consecutive
/// outer objectives differ by less than eps_k |J0| with both constraints
/// within tolerance. Also stops after max_outer_steps,
/// when the mesh-update budget is spent, or on a mesh-quality failure.
AugLagResult run_augmented_lagrange(const Mesh& initial_mesh, const OptimizerConfig& cfg,
                                    const SolverSuite& solvers, Observer observer = {});

struct GradientCheck {
  int node = -1;
  double h = 0.0;
  double adjoint = 0.0;            // shape_derivative along the node-normal bump
  double finite_difference = 0.0;  // central difference of J
  double relative_error = 0.0;
};

/// Moves Design node `node` by +-h along its normal (no other node moves),
/// re-solves the flow on both sides and compares with the adjoint
/// derivative. Flow solves use a nonlinear tolerance of at most 1e-12.
/// Throws std::invalid_argument("not a design node") for other nodes.
GradientCheck check_gradient(const Mesh& mesh, const SolverSuite& solvers, const AugLagState& al, int node,
                             double h);

/// End-of-run indicators: objective ratio, tip opening angle, half-axis
/// ratio (final and after 50 mesh updates), mesh quality, constraints.
struct RunSummary {
  LoopStatus status = LoopStatus::Converged;
  double p = 0.0;
  int mesh_steps = 0;
  int outer_steps = 0;
  double J0 = 0.0;
  double J = 0.0;
  double J_ratio = 0.0;
  double tip_angle = 0.0;
  double half_axis_ratio = 0.0;
  double half_axis_ratio_50 = 0.0;  // NaN when fewer than 50 updates were made
  double max_aspect_ratio = 0.0;
  double min_angle = 0.0;
  double b_norm = 0.0;
  double c_abs = 0.0;
  AugLagState al;
};

RunSummary summarize(const AugLagResult& result, const SolverSuite& solvers);
void write_summary(std::ostream& out, const RunSummary& summary);

void write_history_csv(std::ostream& out, const History& history);
/// Wall times kept apart so that history.csv is reproducible bit for bit.
void write_timing_csv(std::ostream& out, const History& history);
void write_outer_csv(std::ostream& out, const std::vector<OuterRecord>& outer);

}  // namespace pshape
