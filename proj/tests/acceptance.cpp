// Acceptance suite: one PASS/FAIL line per criterion. Runs the desk case
// (~3k cells) for p = 2, 4 (100 updates) and p = 3 (50 updates).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pshape/config.hpp"
#include "pshape/mesh_io.hpp"
#include "pshape/optimizer.hpp"

using namespace pshape;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %d %-28s %s  %s\n", id, name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Mesh desk_mesh() { return generate_channel_mesh(fit_cell_count(ChannelSpec{}, 3000)); }

Mesh small_mesh() {
  ChannelSpec spec;
  spec.boundary_nodes = 12;
  spec.structured_layers = 2;
  spec.max_size = 5.0;
  return generate_channel_mesh(spec);
}

SolverSuite suite(double p) {
  SolverSuite s;
  s.plaplace.p = p;
  return s;
}

OptimizerConfig desk_optimizer(int steps) {
  OptimizerConfig cfg;
  const ChannelSpec spec;
  cfg.al.target_volume = spec.length * spec.height - obstacle_area(spec);
  cfg.max_total_steps = steps;
  return cfg;
}

struct Run {
  AugLagResult result;
  RunSummary summary;
  double seconds = 0.0;
};

Run run_case(const Mesh& mesh, double p, int steps, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  r.result = run_augmented_lagrange(mesh, desk_optimizer(steps), suite(p));
  r.seconds = seconds_since(t0);
  r.summary = summarize(r.result, suite(p));
  fs::create_directories(out);
  write_atomically(out / "history.csv", [&](std::ostream& o) { write_history_csv(o, r.result.history); });
  write_atomically(out / "outer.csv", [&](std::ostream& o) { write_outer_csv(o, r.result.outer); });
  write_atomically(out / "summary.txt", [&](std::ostream& o) { write_summary(o, r.summary); });
  save_mesh(r.result.mesh, out / "final_mesh.txt");
  std::printf("  run p=%g: %s, %d updates, J/J0 %.4f, tip %.1f, a/b %.3f, a/b@50 %.3f, AR %.2f, min angle %.1f, %.0f s\n",
              p, to_string(r.summary.status).c_str(), r.summary.mesh_steps, r.summary.J_ratio, r.summary.tip_angle,
              r.summary.half_axis_ratio, r.summary.half_axis_ratio_50, r.summary.max_aspect_ratio,
              r.summary.min_angle, r.seconds);
  std::fflush(stdout);
  return r;
}

// first outer step (1-based) after which penalties stay fixed and both
// constraints stay within tolerance
int settling_outer_step(const AugLagResult& r, const AugLagState& initial) {
  const auto& outer = r.outer;
  int settled = static_cast<int>(outer.size()) + 1;
  for (int k = static_cast<int>(outer.size()) - 1; k >= 0; --k) {
    const AugLagState& before = k == 0 ? initial : outer[k - 1].al;
    const bool feasible = outer[k].b.norm() <= before.tau_b && std::abs(outer[k].c) <= before.tau_c;
    const bool penalties_fixed = outer[k].al.rho_b == before.rho_b && outer[k].al.rho_c == before.rho_c;
    if (!feasible || !penalties_fixed) break;
    settled = k + 1;
  }
  return settled;
}

void criterion_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh m = small_mesh();
  AugLagState al;
  al.target_volume = volume(m);
  const auto nodes = design_nodes(m);
  std::mt19937 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const auto g = check_gradient(m, suite(2.0), al, nodes[pick(rng)], 1e-5);
    worst = std::max(worst, g.relative_error);
  }
  const double t = seconds_since(t0);
  report(1, "gradient consistency", worst < 2e-2 && t < 120.0,
         std::to_string(m.cell_count()) + " cells, worst rel. error " + fmt("%.2e", worst) + ", " +
             fmt("%.1f", t) + " s");
}

void criterion_p2(const Mesh& desk) {
  const auto t0 = std::chrono::steady_clock::now();
  const FluidProperties props;
  const SolverConfig cfg;
  const FlowState flow = solve_primal(desk, props, cfg);
  const AdjointState adj = solve_adjoint(desk, flow, props, cfg);
  AugLagState al;
  al.target_volume = volume(desk);
  const auto gamma = shape_sensitivity(desk, flow, adj, props, al);
  PLaplaceConfig pc;
  pc.p = 2.0;
  pc.eps_reg = 0.0;
  const auto a = solve_plaplace(desk, gamma, pc);
  const auto b = solve_laplace(desk, gamma);
  double d = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) d = std::max(d, (a.u[i] - b.u[i]).lpNorm<Eigen::Infinity>());
  const double t = seconds_since(t0);
  report(2, "p=2 equivalence", d <= 1e-8 && t < 30.0, "max diff " + fmt("%.2e", d) + ", " + fmt("%.1f", t) + " s");
}

void criterion_strip() {
  const std::array<BoundaryTag, 4> sides{BoundaryTag::SlipWall, BoundaryTag::Design, BoundaryTag::Design,
                                         BoundaryTag::Design};
  const Mesh m = generate_rectangle_mesh({0, 0}, {3, 1}, 12, 8, sides);
  const double g = 1.3;
  EdgeLoad load(m.boundary_edges.size(), {0.0, 0.0});
  for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
    const auto& be = m.boundary_edges[e];
    if (m.nodes[be.nodes[0]].y() == 1.0 && m.nodes[be.nodes[1]].y() == 1.0) load[e] = {g, g};
  }
  double worst = 0.0;
  for (double p : {2.0, 3.0, 4.0, 6.0}) {
    PLaplaceConfig cfg;
    cfg.p = p;
    cfg.eps_reg = 0.0;
    cfg.tolerance = 1e-12;
    const auto u = solve_plaplace(m, load, cfg);
    const double slope = -std::pow(g, 1.0 / (p - 1.0));
    for (std::size_t i = 0; i < m.node_count(); ++i) {
      worst = std::max(worst, std::abs(u.u[i].y() - slope * m.nodes[i].y()));
      worst = std::max(worst, std::abs(u.u[i].x()));
    }
  }
  report(3, "strip analytic profile", worst <= 1e-6, "max error " + fmt("%.2e", worst) + " over p = 2, 3, 4, 6");
}

void criterion_properties(const Mesh& desk, const Run& r2, const Run& r4) {
  std::ostringstream why;
  bool ok = true;
  auto need = [&](bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why << what << "; ";
    }
  };

  // geometric oracle: rectangle area and centroid
  const std::array<BoundaryTag, 4> sides{BoundaryTag::SlipWall, BoundaryTag::Outflow, BoundaryTag::SlipWall,
                                         BoundaryTag::Inflow};
  const Mesh rect = generate_rectangle_mesh({-2, -1}, {4, 1}, 9, 4, sides);
  need(std::abs(volume(rect) - 12.0) <= 1e-12 * 12.0 && (barycenter(rect) - Vec2(1, 0)).norm() <= 1e-12,
       "mesh geometry");

  // uniform flow
  const FlowState uni = solve_primal(rect, FluidProperties{}, SolverConfig{});
  double du = 0.0;
  for (const Vec2& v : uni.velocity) du = std::max(du, (v - Vec2(1, 0)).norm());
  need(du <= 1e-12, "uniform flow");

  // Stokes transpose consistency
  const Mesh tiny = generate_rectangle_mesh({0, 0}, {2, 1}, 2, 2, sides);
  const MixedLayout layout{fem::build_p2_layout(tiny)};
  FluidProperties stokes;
  stokes.density = 0.0;
  const Eigen::MatrixXd A(mixed_operator(tiny, layout, stokes, MixedOperator::Oseen, {}));
  const Eigen::MatrixXd B(mixed_operator(tiny, layout, stokes, MixedOperator::Adjoint, {}));
  need(layout.size() <= 100 && (A - B.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * A.cwiseAbs().maxCoeff(),
       "Stokes transpose");

  // energy monotonicity of the p = 4 solve on the desk mesh
  SensitivityField gamma;
  gamma.nodes = design_nodes(desk);
  gamma.gamma.assign(desk.node_count(), 0.0);
  for (int v : gamma.nodes) gamma.gamma[v] = std::cos(std::atan2(desk.nodes[v].y(), desk.nodes[v].x()));
  PLaplaceConfig pc;
  pc.p = 4.0;
  PLaplaceStats stats;
  solve_plaplace(desk, gamma, pc, std::nullopt, &stats);
  bool mono = stats.converged;
  for (std::size_t k = 1; k < stats.energy_history.size(); ++k)
    mono = mono && stats.energy_history[k] <= stats.energy_history[k - 1];
  need(mono, "energy monotonicity");

  // descent certificate on every accepted step
  int accepted = 0;
  bool descent = true;
  for (const Run* r : {&r2, &r4})
    for (const auto& h : r->result.history)
      if (h.step_size > 0.0) {
        ++accepted;
        descent = descent && h.derivative < 0.0;
      }
  need(descent && accepted > 0, "descent certificate");

  // reproducible history
  auto history = [&] {
    std::ostringstream out;
    write_history_csv(out, run_augmented_lagrange(desk, desk_optimizer(3), suite(4.0)).history);
    return out.str();
  };
  need(history() == history(), "history reproducibility");

  report(9, "property suites", ok,
         ok ? "geometry, uniform flow, Stokes transpose, energy, descent (" + std::to_string(accepted) +
                  " steps), reproducibility"
            : why.str());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  const auto t0 = std::chrono::steady_clock::now();

  criterion_gradient();
  const Mesh desk = desk_mesh();
  std::printf("  desk mesh: %zu cells, %zu nodes\n", desk.cell_count(), desk.node_count());
  criterion_p2(desk);
  criterion_strip();

  const auto t_runs = std::chrono::steady_clock::now();
  const Run r2 = run_case(desk, 2.0, 100, out / "p2");
  const Run r4 = run_case(desk, 4.0, 100, out / "p4");
  const double t_pair = seconds_since(t_runs);
  const Run r3 = run_case(desk, 3.0, 50, out / "p3");

  const auto& s2 = r2.summary;
  const auto& s3 = r3.summary;
  const auto& s4 = r4.summary;

  {
    const bool in_range = s2.J_ratio >= 0.88 && s2.J_ratio <= 0.97 && s4.J_ratio >= 0.88 && s4.J_ratio <= 0.97;
    const bool ok = s2.mesh_steps == 100 && s4.mesh_steps == 100 && s2.J_ratio < 0.97 && s4.J_ratio < 0.97 &&
                    in_range && s4.J_ratio <= s2.J_ratio && t_pair <= 45 * 60;
    report(4, "drag ordering", ok,
           "J/J0 p2 " + fmt("%.4f", s2.J_ratio) + ", p4 " + fmt("%.4f", s4.J_ratio) + " (ref 0.9243, 0.9211), " +
               fmt("%.0f", t_pair) + " s");
  }
  {
    const double gap = s2.tip_angle - s4.tip_angle;
    const bool ok = gap >= 10.0 && std::abs(s2.tip_angle - 163.8) <= 20.0 && std::abs(s4.tip_angle - 140.4) <= 20.0;
    report(5, "tip pointedness", ok,
           "tip p2 " + fmt("%.1f", s2.tip_angle) + ", p4 " + fmt("%.1f", s4.tip_angle) + ", gap " + fmt("%.1f", gap) +
               " (need >= 10; refs 163.8, 140.4 +-20)");
  }
  {
    const double a2 = s2.half_axis_ratio_50, a3 = s3.half_axis_ratio_50, a4 = s4.half_axis_ratio_50;
    const bool ok = a2 < a3 && a3 < a4 && std::abs(a2 - 1.4) <= 0.3 && std::abs(a3 - 1.6) <= 0.3 &&
                    std::abs(a4 - 1.8) <= 0.3;
    report(6, "half-axis growth", ok,
           "a/b at 50: p2 " + fmt("%.3f", a2) + ", p3 " + fmt("%.3f", a3) + ", p4 " + fmt("%.3f", a4) +
               " (refs 1.4, 1.6, 1.8 +-0.3, strictly increasing)");
  }
  {
    const bool ok = s4.max_aspect_ratio <= 0.5 * s2.max_aspect_ratio && s4.min_angle >= s2.min_angle;
    report(7, "mesh quality ordering", ok,
           "max AR p2 " + fmt("%.2f", s2.max_aspect_ratio) + ", p4 " + fmt("%.2f", s4.max_aspect_ratio) +
               "; min angle p2 " + fmt("%.1f", s2.min_angle) + ", p4 " + fmt("%.1f", s4.min_angle));
  }
  {
    const AugLagState al0 = desk_optimizer(0).al;
    bool ok = true;
    std::ostringstream d;
    for (const Run* r : {&r2, &r4}) {
      const Vec2 b = barycenter_residual(r->result.mesh, al0);
      const double c = volume_residual(r->result.mesh, al0);
      const int settle = settling_outer_step(r->result, al0);
      ok = ok && std::abs(c) <= al0.tau_c && b.norm() <= r->result.al.tau_b && settle <= 6;
      d << "p" << r->summary.p << ": |b| " << fmt("%.1e", b.norm()) << ", |c| " << fmt("%.1e", std::abs(c))
        << ", settled at outer " << settle << " of " << r->result.outer.size() << " (lambda_b "
        << fmt("%.3g", r->result.al.lambda_b.x()) << ", lambda_c " << fmt("%.3g", r->result.al.lambda_c) << "); ";
    }
    report(8, "constraint satisfaction", ok, d.str());
  }
  criterion_properties(desk, r2, r4);

  std::printf("acceptance: %d of 9 criteria failed, %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
