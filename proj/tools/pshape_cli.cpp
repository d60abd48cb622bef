#include <cmath>
#include <filesystem>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pshape/adjoint.hpp"
#include "pshape/config.hpp"
#include "pshape/mesh_io.hpp"
#include "pshape/optimizer.hpp"

namespace fs = std::filesystem;
using namespace pshape;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;
constexpr int kMeshQualityFailure = 4;

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cout << line << std::endl;
}

VtkFields quality_fields(const Mesh& mesh) {
  const auto q = quality(mesh);
  VtkFields f;
  f.cell.push_back({"aspect_ratio", q.aspect_ratio});
  f.cell.push_back({"min_angle", q.min_interior_angle});
  return f;
}

// velocity/pressure restricted to the vertices; P2 nodes are numbered
// vertices first
VtkFields step_fields(const StepView& view) {
  VtkFields f = quality_fields(view.mesh);
  const std::size_t nv = view.mesh.nodes.size();
  if (view.flow.velocity.size() >= nv) {
    f.point.push_back({"velocity", std::vector<Vec2>(view.flow.velocity.begin(), view.flow.velocity.begin() + nv)});
    f.point.push_back({"pressure", view.flow.pressure});
  }
  if (view.gamma) f.point.push_back({"gamma", view.gamma->gamma});
  if (view.direction) f.point.push_back({"direction", view.direction->u});
  return f;
}

std::string step_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%05d.vtk", step);
  return buf;
}

void prepare(RunConfig& cfg, const Mesh& mesh) {
  if (cfg.target_volume_from_mesh) cfg.optimizer.al.target_volume = volume(mesh);
}

void write_failure(const fs::path& dir, const std::string& kind, const std::string& what) {
  fs::create_directories(dir);
  write_atomically(dir / "failure.txt", [&](std::ostream& out) {
    out << "kind = " << kind << '\n' << "message = " << what << '\n';
  });
}

struct RunOutcome {
  int code = kOk;
  std::string line;
};

RunOutcome optimize_one(RunConfig cfg, const fs::path& out_dir, const std::string& tag) {
  RunOutcome outcome;
  try {
    const Mesh mesh = build_mesh(cfg.mesh);
    prepare(cfg, mesh);
    fs::create_directories(out_dir);

    int last_written = -1;
    const int every = cfg.checkpoint_every;
    Observer observer = [&](const StepView& view) {
      const auto& r = view.record;
      if (r.row % 10 == 0 || r.retries > 0) {
        std::ostringstream msg;
        msg << tag << "row " << r.row << " outer " << r.outer << " step " << r.mesh_step << " J/J0 "
            << r.J_ratio << " |b| " << r.b_norm << " |c| " << r.c_abs;
        log_line(msg.str());
      }
      if (every > 0 && r.mesh_step % every == 0 && r.mesh_step != last_written) {
        last_written = r.mesh_step;
        write_vtk(view.mesh, step_fields(view), out_dir / step_name(r.mesh_step));
      }
    };

    const AugLagResult result = run_augmented_lagrange(mesh, cfg.optimizer, cfg.solvers, observer);
    const RunSummary summary = summarize(result, cfg.solvers);

    write_atomically(out_dir / "history.csv", [&](std::ostream& o) { write_history_csv(o, result.history); });
    write_atomically(out_dir / "timing.csv", [&](std::ostream& o) { write_timing_csv(o, result.history); });
    write_atomically(out_dir / "outer.csv", [&](std::ostream& o) { write_outer_csv(o, result.outer); });
    write_atomically(out_dir / "summary.txt", [&](std::ostream& o) { write_summary(o, summary); });
    save_mesh(result.mesh, out_dir / "final_mesh.txt");
    write_vtk(result.mesh, quality_fields(result.mesh), out_dir / "final.vtk");

    std::ostringstream msg;
    msg << tag << "status " << to_string(summary.status) << " steps " << summary.mesh_steps << " J/J0 "
        << summary.J_ratio << " tip " << summary.tip_angle << " a/b " << summary.half_axis_ratio << " AR "
        << summary.max_aspect_ratio << " min angle " << summary.min_angle;
    outcome.line = msg.str();
    if (summary.status == LoopStatus::MeshQualityFailure) {
      write_failure(out_dir, "mesh-quality", "step size could not be reduced enough to keep cells positive");
      outcome.code = kMeshQualityFailure;
    }
  } catch (const ConfigError& e) {
    outcome = {kConfigError, tag + "config error: " + e.what()};
  } catch (const MeshError& e) {
    outcome = {kConfigError, tag + "mesh error: " + e.what()};
  } catch (const SolverError& e) {
    write_failure(out_dir, "solver", std::string(e.what()) + " (residual " + format_real(e.residual()) + ")");
    outcome = {kSolverFailure, tag + "solver failure: " + e.what()};
  } catch (const std::invalid_argument& e) {
    outcome = {kConfigError, tag + "invalid parameter: " + e.what()};
  } catch (const std::exception& e) {
    write_failure(out_dir, "internal", e.what());
    outcome = {kSolverFailure, tag + "failure: " + e.what()};
  }
  return outcome;
}

int worst(int a, int b) { return a == kOk ? b : (b == kOk ? a : std::max(a, b)); }

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MeshError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> ps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size()) throw ConfigError("--p-sweep: bad value '" + item + "'");
    if (!(p >= 2.0)) throw ConfigError("--p-sweep: p must be ≥ 2");
    ps.push_back(p);
  }
  if (ps.empty()) throw ConfigError("--p-sweep: empty list");
  return ps;
}

std::string p_label(double p) {
  std::ostringstream s;
  s << "p" << p;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pshape: 2D drag minimization with p-Laplace descent directions"};
  app.require_subcommand(1);

  std::string config_path, out_dir, p_sweep, mesh_path;
  bool dry_run = false, h_sweep = false;
  int seed = 0, checkpoint_every = -1, node = -1;
  double h = 1e-6;

  auto* opt = app.add_subcommand("optimize", "run the augmented Lagrange shape optimization");
  opt->add_option("-c,--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  opt->add_option("-o,--out", out_dir, "output directory (overrides output.dir)");
  opt->add_flag("--dry-run", dry_run, "validate config and mesh, write step 0 and exit");
  opt->add_option("--p-sweep", p_sweep, "comma separated p values run concurrently, e.g. 2,3,4");
  opt->add_option("--seed", seed, "reserved; the optimizer is deterministic");
  opt->add_option("--checkpoint-every", checkpoint_every, "VTK every N mesh updates, 0 = off");

  auto* grad = app.add_subcommand("check-gradient", "compare the adjoint shape derivative with finite differences");
  grad->add_option("-c,--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  grad->add_option("--node", node, "design node index")->required();
  grad->set_help_flag("--help", "print this help message and exit");
  grad->add_option("--h", h, "normal displacement")->check(CLI::PositiveNumber);
  grad->add_flag("--h-sweep", h_sweep, "use h = 1e-4, 1e-5, 1e-6");

  auto* mq = app.add_subcommand("mesh-quality", "report aspect ratio and angles of a mesh");
  mq->add_option("mesh", mesh_path, "mesh file (*.msh for Gmsh)")->required()->check(CLI::ExistingFile);
  mq->add_option("-o,--out", out_dir, "VTK file with per-cell quality");

  auto* flow = app.add_subcommand("solve-flow", "solve the flow on the initial mesh and report drag");
  flow->add_option("-c,--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  flow->add_option("-o,--out", out_dir, "VTK file with the flow field");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*opt) {
    return guarded([&] {
      RunConfig cfg = parse_config(fs::path(config_path));
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (checkpoint_every >= 0) cfg.checkpoint_every = checkpoint_every;
      (void)seed;

      if (dry_run) {
        Mesh mesh = build_mesh(cfg.mesh);
        prepare(cfg, mesh);
        check(cfg.optimizer);
        check(cfg.solvers.fluid);
        check(cfg.solvers.flow);
        check(cfg.solvers.plaplace);
        fs::create_directories(cfg.output_dir);
        write_vtk(mesh, quality_fields(mesh), cfg.output_dir / step_name(0));
        const auto q = quality(mesh);
        std::cout << "nodes " << mesh.nodes.size() << " cells " << mesh.cell_count() << " volume "
                  << volume(mesh) << " target volume " << cfg.optimizer.al.target_volume << " max AR "
                  << q.max_aspect_ratio << " min angle " << q.min_angle << '\n';
        return kOk;
      }

      if (p_sweep.empty()) {
        const RunOutcome r = optimize_one(cfg, cfg.output_dir, "");
        (r.code == kOk ? std::cout : std::cerr) << r.line << '\n';
        return r.code;
      }

      std::vector<std::future<RunOutcome>> runs;
      for (double p : parse_sweep(p_sweep)) {
        RunConfig c = cfg;
        c.solvers.plaplace.p = p;
        c.solvers.plaplace.schedule.clear();
        const std::string label = p_label(p);
        runs.push_back(std::async(std::launch::async, optimize_one, c, cfg.output_dir / label, "[" + label + "] "));
      }
      int code = kOk;
      for (auto& f : runs) {
        const RunOutcome r = f.get();
        log_line(r.line);
        code = worst(code, r.code);
      }
      return code;
    });
  }

  if (*grad) {
    return guarded([&] {
      RunConfig cfg = parse_config(fs::path(config_path));
      const Mesh mesh = build_mesh(cfg.mesh);
      prepare(cfg, mesh);
      const std::vector<double> hs = h_sweep ? std::vector<double>{1e-4, 1e-5, 1e-6} : std::vector<double>{h};
      std::cout << "h,adjoint,finite_difference,relative_error\n";
      for (double hi : hs) {
        const GradientCheck g = check_gradient(mesh, cfg.solvers, cfg.optimizer.al, node, hi);
        std::cout << format_real(g.h) << ',' << format_real(g.adjoint) << ',' << format_real(g.finite_difference)
                  << ',' << format_real(g.relative_error) << '\n';
      }
      return kOk;
    });
  }

  if (*mq) {
    return guarded([&] {
      const fs::path path(mesh_path);
      const Mesh mesh = load_mesh(path, path.extension() == ".msh" ? MeshFormat::GmshV2 : MeshFormat::NativeText);
      const auto q = quality(mesh);
      std::cout << "nodes = " << mesh.nodes.size() << '\n'
                << "cells = " << mesh.cell_count() << '\n'
                << "max_aspect_ratio = " << format_real(q.max_aspect_ratio) << '\n'
                << "min_angle = " << format_real(q.min_angle) << '\n'
                << "tip_angle = " << format_real(q.tip_opening_angle) << '\n'
                << "half_axis_ratio = " << format_real(q.half_axis_ratio) << '\n';
      if (!out_dir.empty()) write_vtk(mesh, quality_fields(mesh), fs::path(out_dir));
      return kOk;
    });
  }

  if (*flow) {
    return guarded([&] {
      RunConfig cfg = parse_config(fs::path(config_path));
      const Mesh mesh = build_mesh(cfg.mesh);
      prepare(cfg, mesh);
      const FlowState state = solve_primal(mesh, cfg.solvers.fluid, cfg.solvers.flow);
      const Vec2 f = reaction_force(mesh, state, cfg.solvers.fluid);
      const Vec2 fb = force(mesh, state, cfg.solvers.fluid);
      const ObjectiveValue J = objective(mesh, state, cfg.solvers.fluid, cfg.optimizer.al);
      std::cout << "picard_iterations = " << state.picard_iterations << '\n'
                << "residual = " << format_real(state.residual_norm) << '\n'
                << "force = " << format_real(f.x()) << ' ' << format_real(f.y()) << '\n'
                << "boundary_force = " << format_real(fb.x()) << ' ' << format_real(fb.y()) << '\n'
                << "drag = " << format_real(J.drag) << '\n'
                << "J = " << format_real(J.total) << '\n';
      if (!out_dir.empty()) {
        const std::size_t nv = mesh.nodes.size();
        VtkFields fields = quality_fields(mesh);
        fields.point.push_back({"velocity", std::vector<Vec2>(state.velocity.begin(), state.velocity.begin() + nv)});
        fields.point.push_back({"pressure", state.pressure});
        write_vtk(mesh, fields, fs::path(out_dir));
      }
      return kOk;
    });
  }
  return kOk;
}
