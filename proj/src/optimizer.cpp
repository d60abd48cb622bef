#include "pshape/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pshape/mesh_io.hpp"

namespace pshape {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void fill_geometry(HistoryRecord& rec, const Mesh& mesh, const AugLagState& al) {
  const auto q = quality(mesh);
  rec.max_aspect_ratio = q.max_aspect_ratio;
  rec.min_angle = q.min_angle;
  rec.tip_angle = q.tip_opening_angle;
  rec.half_axis_ratio = q.half_axis_ratio;
  rec.b_norm = barycenter_residual(mesh, al).norm();
  rec.c_abs = std::abs(volume_residual(mesh, al));
}

}  // namespace

void check(const OptimizerConfig& cfg) {
  check(cfg.al);
  if (cfg.eps_sequence.empty()) throw std::invalid_argument("tolerance sequence must not be empty");
  for (std::size_t i = 0; i < cfg.eps_sequence.size(); ++i) {
    if (!(cfg.eps_sequence[i] > 0.0)) throw std::invalid_argument("tolerance sequence values must be > 0");
    if (i > 0 && !(cfg.eps_sequence[i] < cfg.eps_sequence[i - 1]))
      throw std::invalid_argument("tolerance sequence must be strictly decreasing");
  }
  if (cfg.max_design_steps < 1) throw std::invalid_argument("max design steps must be >= 1");
  if (cfg.max_outer_steps < 1) throw std::invalid_argument("max outer steps must be >= 1");
  if (cfg.max_total_steps < 0) throw std::invalid_argument("max total steps must be >= 0");
  if (cfg.max_step_retries < 0) throw std::invalid_argument("max step retries must be >= 0");
}

std::string to_string(LoopStatus status) {
  switch (status) {
    case LoopStatus::Converged: return "converged";
    case LoopStatus::StepLimit: return "step limit";
    case LoopStatus::StepBudget: return "step budget";
    case LoopStatus::MeshQualityFailure: return "mesh-quality failure";
  }
  return "unknown";
}

ShapeLoopResult run_shape_loop(const Mesh& mesh, const AugLagState& al, double eps,
                               const SolverSuite& solvers, int max_design_steps, RunContext& ctx) {
  if (!(eps > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (ctx.start_time < 0.0) ctx.start_time = now();
  ShapeLoopResult out;
  out.mesh = mesh;
  double J_prev = 0.0;

  for (int inner = 0;; ++inner) {
    FlowState flow = solve_primal(out.mesh, solvers.fluid, solvers.flow, ctx.flow_warm);
    ctx.flow_warm = flow;
    const auto obj = objective(out.mesh, flow, solvers.fluid, al);
    if (!ctx.J0) ctx.J0 = obj.total;

    HistoryRecord rec;
    rec.row = ctx.rows++;
    rec.outer = ctx.outer;
    rec.inner = inner;
    rec.mesh_step = ctx.mesh_steps;
    rec.J = obj.total;
    rec.J_ratio = obj.total / *ctx.J0;
    rec.drag = obj.drag;
    rec.barycenter_penalty = obj.barycenter_penalty;
    rec.volume_penalty = obj.volume_penalty;
    rec.gamma_max = rec.energy = rec.derivative = kNaN;
    rec.picard_iterations = flow.picard_iterations;
    fill_geometry(rec, out.mesh, al);
    out.J = obj.total;

    auto finish = [&](LoopStatus status) {
      rec.wall_time = now() - ctx.start_time;
      out.history.push_back(rec);
      if (ctx.observer) ctx.observer(StepView{rec, out.mesh, flow, nullptr, nullptr});
      out.status = status;
    };
    if (inner > 0 && std::abs(obj.total - J_prev) < eps * std::abs(*ctx.J0)) {
      finish(LoopStatus::Converged);
      return out;
    }
    if (inner >= max_design_steps) {
      finish(LoopStatus::StepLimit);
      return out;
    }
    if (ctx.max_total_steps > 0 && ctx.mesh_steps >= ctx.max_total_steps) {
      finish(LoopStatus::StepBudget);
      return out;
    }

    const auto adj = solve_adjoint(out.mesh, flow, solvers.fluid, solvers.flow);
    const auto gamma = shape_sensitivity(out.mesh, flow, adj, solvers.fluid, al);
    PLaplaceStats stats;
    const auto u = solve_plaplace(out.mesh, gamma, solvers.plaplace, ctx.direction_warm, &stats);
    ctx.direction_warm = u;
    rec.gamma_max = 0.0;
    for (int i : gamma.nodes) rec.gamma_max = std::max(rec.gamma_max, std::abs(gamma.gamma[i]));
    rec.energy = stats.energy;
    rec.derivative = shape_derivative(out.mesh, gamma, u);
    rec.newton_iterations = stats.iterations;

    double t = al.step_size;
    std::optional<Mesh> moved;
    for (int attempt = 0; attempt <= ctx.max_step_retries; ++attempt) {
      try {
        moved = morph(out.mesh, u.u, t);
        rec.retries = attempt;
        break;
      } catch (const InvertedCellError&) {
        t *= 0.5;
      }
    }
    if (!moved) {
      rec.retries = ctx.max_step_retries;
      rec.wall_time = now() - ctx.start_time;
      out.history.push_back(rec);
      if (ctx.observer) ctx.observer(StepView{rec, out.mesh, flow, &gamma, &u});
      out.status = LoopStatus::MeshQualityFailure;
      return out;
    }
    rec.step_size = t;
    rec.wall_time = now() - ctx.start_time;
    out.history.push_back(rec);
    if (ctx.observer) ctx.observer(StepView{rec, out.mesh, flow, &gamma, &u});

    out.mesh = std::move(*moved);
    ++ctx.mesh_steps;
    J_prev = obj.total;
  }
}

AugLagState update_multipliers(const AugLagState& al, const Vec2& b, double c) {
  AugLagState next = al;
  if (b.norm() > al.tau_b) {
    next.rho_b = al.rho_inc * al.rho_b;
  } else {
    next.lambda_b = al.lambda_b + al.rho_b * b;
  }
  if (std::abs(c) > al.tau_c) {
    next.rho_c = al.rho_inc * al.rho_c;
  } else {
    next.lambda_c = al.lambda_c + al.rho_c * c;
  }
  return next;
}

AugLagResult run_augmented_lagrange(const Mesh& initial_mesh, const OptimizerConfig& cfg,
                                    const SolverSuite& solvers, Observer observer) {
  check(cfg);
  RunContext ctx;
  ctx.max_total_steps = cfg.max_total_steps;
  ctx.max_step_retries = cfg.max_step_retries;
  ctx.observer = std::move(observer);

  AugLagResult out;
  out.mesh = initial_mesh;
  out.al = cfg.al;
  for (int k = 0; k < cfg.max_outer_steps; ++k) {
    ctx.outer = k;
    const double eps = cfg.eps_sequence[std::min<std::size_t>(k, cfg.eps_sequence.size() - 1)];
    auto inner = run_shape_loop(out.mesh, out.al, eps, solvers, cfg.max_design_steps, ctx);
    out.mesh = std::move(inner.mesh);
    out.history.insert(out.history.end(), inner.history.begin(), inner.history.end());

    OuterRecord rec;
    rec.outer = k;
    rec.eps = eps;
    rec.J = inner.J;
    rec.b = barycenter_residual(out.mesh, out.al);
    rec.c = volume_residual(out.mesh, out.al);
    const bool feasible = rec.b.norm() <= out.al.tau_b && std::abs(rec.c) <= out.al.tau_c;
    out.al = update_multipliers(out.al, rec.b, rec.c);
    rec.al = out.al;
    // the outer test only applies once the tolerance sequence is used up
    const bool last_eps = k + 1 >= static_cast<int>(cfg.eps_sequence.size());
    const bool settled =
        last_eps && !out.outer.empty() && std::abs(rec.J - out.outer.back().J) < eps * std::abs(*ctx.J0);
    out.outer.push_back(rec);

    out.status = inner.status;
    if (inner.status == LoopStatus::MeshQualityFailure || inner.status == LoopStatus::StepBudget) return out;
    if (settled && feasible) {
      out.status = LoopStatus::Converged;
      return out;
    }
  }
  out.status = LoopStatus::StepLimit;
  return out;
}

GradientCheck check_gradient(const Mesh& mesh, const SolverSuite& solvers, const AugLagState& al, int node,
                             double h) {
  const auto nodes = design_nodes(mesh);
  if (!std::binary_search(nodes.begin(), nodes.end(), node)) throw std::invalid_argument("not a design node");
  if (!(h > 0.0)) throw std::invalid_argument("bump size must be > 0");
  SolverConfig flow_cfg = solvers.flow;
  flow_cfg.nonlinear_tolerance = std::min(flow_cfg.nonlinear_tolerance, 1e-12);

  const auto flow = solve_primal(mesh, solvers.fluid, flow_cfg);
  const auto adj = solve_adjoint(mesh, flow, solvers.fluid, flow_cfg);
  const auto gamma = shape_sensitivity(mesh, flow, adj, solvers.fluid, al);
  DeformationField bump{std::vector<Vec2>(mesh.node_count(), Vec2::Zero())};
  bump.u[node] = design_normals(mesh)[node];

  auto J = [&](double t) {
    const Mesh moved = morph(mesh, bump.u, t);
    return objective(moved, solve_primal(moved, solvers.fluid, flow_cfg, flow), solvers.fluid, al).total;
  };
  GradientCheck out;
  out.node = node;
  out.h = h;
  out.adjoint = shape_derivative(mesh, gamma, bump);
  out.finite_difference = (J(h) - J(-h)) / (2.0 * h);
  out.relative_error = std::abs(out.adjoint - out.finite_difference) / std::abs(out.finite_difference);
  return out;
}

RunSummary summarize(const AugLagResult& result, const SolverSuite& solvers) {
  RunSummary s;
  s.status = result.status;
  s.p = solvers.plaplace.p;
  s.outer_steps = static_cast<int>(result.outer.size());
  s.al = result.al;
  s.half_axis_ratio_50 = kNaN;
  if (!result.history.empty()) {
    const auto& first = result.history.front();
    const auto& last = result.history.back();
    s.mesh_steps = last.mesh_step;
    s.J0 = first.J;
    s.J = last.J;
    s.J_ratio = last.J_ratio;
    for (const auto& r : result.history)
      if (r.mesh_step == 50) {
        s.half_axis_ratio_50 = r.half_axis_ratio;
        break;
      }
  }
  const auto q = quality(result.mesh);
  s.tip_angle = q.tip_opening_angle;
  s.half_axis_ratio = q.half_axis_ratio;
  s.max_aspect_ratio = q.max_aspect_ratio;
  s.min_angle = q.min_angle;
  if (!result.outer.empty()) {
    s.b_norm = result.outer.back().b.norm();
    s.c_abs = std::abs(result.outer.back().c);
  }
  return s;
}

void write_summary(std::ostream& out, const RunSummary& s) {
  out << "status = " << to_string(s.status) << '\n';
  out << "p = " << format_real(s.p) << '\n';
  out << "mesh_steps = " << s.mesh_steps << '\n';
  out << "outer_steps = " << s.outer_steps << '\n';
  out << "J0 = " << format_real(s.J0) << '\n';
  out << "J = " << format_real(s.J) << '\n';
  out << "J_ratio = " << format_real(s.J_ratio) << '\n';
  out << "tip_angle = " << format_real(s.tip_angle) << '\n';
  out << "half_axis_ratio = " << format_real(s.half_axis_ratio) << '\n';
  out << "half_axis_ratio_step50 = " << format_real(s.half_axis_ratio_50) << '\n';
  out << "max_aspect_ratio = " << format_real(s.max_aspect_ratio) << '\n';
  out << "min_angle = " << format_real(s.min_angle) << '\n';
  out << "b_norm = " << format_real(s.b_norm) << '\n';
  out << "c_abs = " << format_real(s.c_abs) << '\n';
  out << "lambda_b = " << format_real(s.al.lambda_b.x()) << ' ' << format_real(s.al.lambda_b.y()) << '\n';
  out << "lambda_c = " << format_real(s.al.lambda_c) << '\n';
  out << "rho_b = " << format_real(s.al.rho_b) << '\n';
  out << "rho_c = " << format_real(s.al.rho_c) << '\n';
}

void write_history_csv(std::ostream& out, const History& history) {
  out << "row,outer,inner,mesh_step,J,J_ratio,drag,barycenter_penalty,volume_penalty,b_norm,c_abs,"
         "gamma_max,energy,derivative,step_size,retries,picard_iterations,newton_iterations,"
         "max_aspect_ratio,min_angle,tip_angle,half_axis_ratio\n";
  for (const auto& r : history) {
    out << r.row << ',' << r.outer << ',' << r.inner << ',' << r.mesh_step;
    for (double v : {r.J, r.J_ratio, r.drag, r.barycenter_penalty, r.volume_penalty, r.b_norm, r.c_abs,
                     r.gamma_max, r.energy, r.derivative, r.step_size})
      out << ',' << format_real(v);
    out << ',' << r.retries << ',' << r.picard_iterations << ',' << r.newton_iterations;
    for (double v : {r.max_aspect_ratio, r.min_angle, r.tip_angle, r.half_axis_ratio}) out << ',' << format_real(v);
    out << '\n';
  }
}

void write_timing_csv(std::ostream& out, const History& history) {
  out << "row,wall_time\n";
  for (const auto& r : history) out << r.row << ',' << format_real(r.wall_time) << '\n';
}

void write_outer_csv(std::ostream& out, const std::vector<OuterRecord>& outer) {
  out << "outer,eps,J,b_x,b_y,c,lambda_b_x,lambda_b_y,lambda_c,rho_b,rho_c\n";
  for (const auto& r : outer) {
    out << r.outer;
    for (double v : {r.eps, r.J, r.b.x(), r.b.y(), r.c, r.al.lambda_b.x(), r.al.lambda_b.y(), r.al.lambda_c,
                     r.al.rho_b, r.al.rho_c})
      out << ',' << format_real(v);
    out << '\n';
  }
}

}  // namespace pshape
