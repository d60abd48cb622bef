#include "pshape/deform.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>

#include "pshape/fem.hpp"

namespace pshape {

void check(const PLaplaceConfig& cfg) {
  if (!(cfg.p >= 2.0)) throw std::invalid_argument("p must be >= 2");
  if (!(cfg.eps_reg >= 0.0)) throw std::invalid_argument("regularization must be >= 0");
  if (!(cfg.tolerance > 0.0) || !(cfg.continuation_tolerance > 0.0))
    throw std::invalid_argument("p-Laplace tolerances must be > 0");
  if (cfg.max_iterations < 1) throw std::invalid_argument("p-Laplace max iterations must be >= 1");
  for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
    if (cfg.schedule[i] < 2.0) throw std::invalid_argument("continuation schedule values must be >= 2");
    if (i > 0 && !(cfg.schedule[i] > cfg.schedule[i - 1]))
      throw std::invalid_argument("continuation schedule must be strictly increasing");
  }
  if (!cfg.schedule.empty() && cfg.schedule.back() != cfg.p)
    throw std::invalid_argument("continuation schedule must end at p");
}

std::vector<double> continuation_schedule(const PLaplaceConfig& cfg) {
  if (!cfg.schedule.empty()) return cfg.schedule;
  std::vector<double> out;
  for (double q = 2.0; q < cfg.p; q += 1.0) out.push_back(q);
  out.push_back(cfg.p);
  return out;
}

std::vector<char> deformable_nodes(const Mesh& mesh) {
  std::vector<char> free(mesh.node_count(), 1);
  for (const auto& be : mesh.boundary_edges)
    if (be.tag != BoundaryTag::Design) free[be.nodes[0]] = free[be.nodes[1]] = 0;
  return free;
}

EdgeLoad edge_load(const Mesh& mesh, const SensitivityField& gamma) {
  EdgeLoad load(mesh.boundary_edges.size(), {0.0, 0.0});
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag == BoundaryTag::Design) load[e] = {gamma.gamma[be.nodes[0]], gamma.gamma[be.nodes[1]]};
  }
  return load;
}

namespace {

std::vector<Vec2> nodal_load(const Mesh& mesh, const EdgeLoad& load) {
  if (load.size() != mesh.boundary_edges.size()) throw std::invalid_argument("edge load size mismatch");
  std::vector<Vec2> f(mesh.node_count(), Vec2::Zero());
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    if (be.tag != BoundaryTag::Design) continue;
    const Vec2 n = edge_normal(mesh, be);
    const double half = 0.5 * edge_length(mesh, be);
    f[be.nodes[0]] += half * load[e][0] * n;
    f[be.nodes[1]] += half * load[e][1] * n;
  }
  return f;
}

// Free-component numbering: node i component d -> index, or -1.
struct FreeMap {
  std::vector<int> index;
  int size = 0;
};

FreeMap free_map(const Mesh& mesh) {
  const auto free = deformable_nodes(mesh);
  FreeMap m;
  m.index.assign(2 * mesh.node_count(), -1);
  for (std::size_t i = 0; i < mesh.node_count(); ++i)
    if (free[i]) {
      m.index[2 * i] = m.size++;
      m.index[2 * i + 1] = m.size++;
    }
  return m;
}

struct Geometry {
  std::vector<fem::CellGeometry> cells;
};

Geometry geometry(const Mesh& mesh) {
  Geometry g;
  g.cells.reserve(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) g.cells.push_back(fem::cell_geometry(mesh, c));
  return g;
}

Mat2 cell_gradient(const Mesh& mesh, const Geometry& geo, std::size_t c, const std::vector<Vec2>& u) {
  Mat2 G = Mat2::Zero();
  for (int a = 0; a < 3; ++a) G += u[mesh.triangles[c][a]] * geo.cells[c].grad_bary[a].transpose();
  return G;
}

double energy(const Mesh& mesh, const Geometry& geo, const std::vector<Vec2>& u,
              const std::vector<Vec2>& f, double p, double eps) {
  double e = 0.0;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const Mat2 G = cell_gradient(mesh, geo, c, u);
    e += geo.cells[c].area * std::pow(eps + G.squaredNorm(), 0.5 * p) / p;
  }
  for (std::size_t i = 0; i < u.size(); ++i) e += f[i].dot(u[i]);
  return e;
}

// Gradient (on free components) and, if requested, the Hessian.
void derivatives(const Mesh& mesh, const Geometry& geo, const FreeMap& map, const std::vector<Vec2>& u,
                 const std::vector<Vec2>& f, double p, double eps, Eigen::VectorXd& grad,
                 fem::SparseMatrix* hess) {
  grad = Eigen::VectorXd::Zero(map.size);
  fem::Triplets trip;
  if (hess) trip.reserve(mesh.cell_count() * 36);
  for (std::size_t i = 0; i < mesh.node_count(); ++i)
    for (int d = 0; d < 2; ++d)
      if (map.index[2 * i + d] >= 0) grad[map.index[2 * i + d]] += f[i](d);

  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& tri = mesh.triangles[c];
    const auto& cg = geo.cells[c];
    const Mat2 G = cell_gradient(mesh, geo, c, u);
    const double q = eps + G.squaredNorm();
    const double s = p == 2.0 ? 1.0 : std::pow(q, 0.5 * (p - 2.0));
    const double t = (p == 2.0 || q == 0.0) ? 0.0 : (p - 2.0) * std::pow(q, 0.5 * (p - 4.0));
    std::array<Vec2, 3> Gg;
    for (int a = 0; a < 3; ++a) Gg[a] = G * cg.grad_bary[a];
    for (int a = 0; a < 3; ++a)
      for (int i = 0; i < 2; ++i) {
        const int r = map.index[2 * tri[a] + i];
        if (r < 0) continue;
        grad[r] += cg.area * s * Gg[a](i);
        if (!hess) continue;
        for (int b = 0; b < 3; ++b)
          for (int k = 0; k < 2; ++k) {
            const int col = map.index[2 * tri[b] + k];
            if (col < 0) continue;
            double h = t * Gg[a](i) * Gg[b](k);
            if (i == k) h += s * cg.grad_bary[a].dot(cg.grad_bary[b]);
            trip.emplace_back(r, col, cg.area * h);
          }
      }
  }
  if (hess) {
    hess->resize(map.size, map.size);
    hess->setFromTriplets(trip.begin(), trip.end());
  }
}

void scatter(const FreeMap& map, const Eigen::VectorXd& x, double step, std::vector<Vec2>& u) {
  for (std::size_t i = 0; i < u.size(); ++i)
    for (int d = 0; d < 2; ++d)
      if (map.index[2 * i + d] >= 0) u[i](d) += step * x[map.index[2 * i + d]];
}

double load_norm(const FreeMap& map, const std::vector<Vec2>& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int d = 0; d < 2; ++d)
      if (map.index[2 * i + d] >= 0) s += f[i](d) * f[i](d);
  return std::sqrt(s);
}

struct StageResult {
  bool converged = false;
  int iterations = 0;
  double energy = 0.0;
  double residual = 0.0;
  std::vector<double> history;
};

StageResult newton(const Mesh& mesh, const Geometry& geo, const FreeMap& map, const std::vector<Vec2>& f,
                   double fnorm, double p, double eps, double tol, int max_it, std::vector<Vec2>& u) {
  StageResult out;
  Eigen::VectorXd grad;
  fem::SparseMatrix H;
  Eigen::SimplicialLDLT<fem::SparseMatrix> ldlt;
  double e = energy(mesh, geo, u, f, p, eps);
  for (;;) {
    derivatives(mesh, geo, map, u, f, p, eps, grad, &H);
    out.residual = grad.norm() / fnorm;
    out.energy = e;
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    if (out.iterations == max_it) return out;
    if (out.iterations == 0) ldlt.analyzePattern(H);
    ldlt.factorize(H);
    if (ldlt.info() != Eigen::Success) return out;
    const Eigen::VectorXd dir = -ldlt.solve(grad);
    const double slope = grad.dot(dir);
    if (!(slope < 0.0)) return out;
    // predicted decrease below the resolution of E: a minimizer up to rounding
    if (-slope <= 1e-15 * std::abs(e)) {
      out.converged = true;
      return out;
    }
    double step = 1.0;
    std::vector<Vec2> trial;
    double et = 0.0;
    for (int k = 0;; ++k) {
      trial = u;
      scatter(map, dir, step, trial);
      et = energy(mesh, geo, trial, f, p, eps);
      if (et <= e + 1e-4 * step * slope) break;
      // roundoff floor: accept a non-increasing step once the decrease is below resolution
      if (k >= 50) {
        if (et <= e) break;
        return out;
      }
      step *= 0.5;
    }
    if (et > e) throw std::logic_error("p-Laplace energy increased on an accepted step");
    u = std::move(trial);
    e = et;
    ++out.iterations;
    out.history.push_back(e);
  }
}

DeformationField zero_field(const Mesh& mesh) {
  return DeformationField{std::vector<Vec2>(mesh.node_count(), Vec2::Zero())};
}

double load_dot(const std::vector<Vec2>& f, const std::vector<Vec2>& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += f[i].dot(u[i]);
  return s;
}

}  // namespace

DeformationField solve_plaplace(const Mesh& mesh, const EdgeLoad& load, const PLaplaceConfig& cfg,
                                const std::optional<DeformationField>& warm_start, PLaplaceStats* stats) {
  check(cfg);
  PLaplaceStats local;
  PLaplaceStats& st = stats ? *stats : local;
  st = PLaplaceStats{};

  const auto f = nodal_load(mesh, load);
  const auto map = free_map(mesh);
  const double fnorm = load_norm(map, f);
  if (fnorm == 0.0) return zero_field(mesh);

  const auto geo = geometry(mesh);
  DeformationField out = zero_field(mesh);
  std::vector<double> stages{cfg.p};
  if (warm_start && warm_start->u.size() == mesh.node_count()) {
    out.u = warm_start->u;
    const auto free = deformable_nodes(mesh);
    for (std::size_t i = 0; i < out.u.size(); ++i)
      if (!free[i]) out.u[i] = Vec2::Zero();
  } else {
    stages = continuation_schedule(cfg);
  }

  for (std::size_t k = 0; k < stages.size(); ++k) {
    const bool last = k + 1 == stages.size();
    const auto r = newton(mesh, geo, map, f, fnorm, stages[k], cfg.eps_reg,
                          last ? cfg.tolerance : cfg.continuation_tolerance, cfg.max_iterations, out.u);
    st.iterations += r.iterations;
    if (last) {
      st.converged = r.converged;
      st.final_iterations = r.iterations;
      st.energy = r.energy;
      st.residual = r.residual;
      st.energy_history = r.history;
    }
  }
  if (st.converged && !(load_dot(f, out.u) < 0.0))
    throw std::logic_error("p-Laplace solution is not a descent direction");
  return out;
}

DeformationField solve_plaplace(const Mesh& mesh, const SensitivityField& gamma, const PLaplaceConfig& cfg,
                                const std::optional<DeformationField>& warm_start, PLaplaceStats* stats) {
  return solve_plaplace(mesh, edge_load(mesh, gamma), cfg, warm_start, stats);
}

DeformationField solve_laplace(const Mesh& mesh, const EdgeLoad& load) {
  const auto f = nodal_load(mesh, load);
  const auto map = free_map(mesh);
  DeformationField out = zero_field(mesh);
  if (load_norm(map, f) == 0.0) return out;
  const auto geo = geometry(mesh);
  Eigen::VectorXd rhs;
  fem::SparseMatrix K;
  derivatives(mesh, geo, map, out.u, f, 2.0, 0.0, rhs, &K);  // gradient at u = 0 is the load
  Eigen::SimplicialLDLT<fem::SparseMatrix> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("Laplace solve failed: singular stiffness");
  scatter(map, ldlt.solve(-rhs), 1.0, out.u);
  return out;
}

DeformationField solve_laplace(const Mesh& mesh, const SensitivityField& gamma) {
  return solve_laplace(mesh, edge_load(mesh, gamma));
}

double plaplace_energy(const Mesh& mesh, const DeformationField& u, const EdgeLoad& load, double p,
                       double eps_reg) {
  return energy(mesh, geometry(mesh), u.u, nodal_load(mesh, load), p, eps_reg);
}

double plaplace_energy(const Mesh& mesh, const DeformationField& u, const SensitivityField& gamma, double p,
                       double eps_reg) {
  return plaplace_energy(mesh, u, edge_load(mesh, gamma), p, eps_reg);
}

}  // namespace pshape
