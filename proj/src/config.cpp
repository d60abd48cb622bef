#include "pshape/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pshape/mesh_io.hpp"

namespace pshape {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_real(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno == ERANGE || v < -2147483647L || v > 2147483647L)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return static_cast<int>(v);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma separated list of numbers");
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir) {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(no) + ": empty key");
    if (!entries.emplace(key, std::pair{value, no}).second)
      throw ConfigError(source + ":" + std::to_string(no) + ": " + key + ": repeated key");
  }

  RunConfig cfg;
  auto& ch = cfg.mesh.channel;
  auto& fl = cfg.solvers.fluid;
  auto& fs = cfg.solvers.flow;
  auto& pl = cfg.solvers.plaplace;
  auto& op = cfg.optimizer;
  auto& al = cfg.optimizer.al;
  std::string generator;
  std::optional<double> diameter, target_volume;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto real = [](double& dst) -> Setter { return [&dst](const auto& k, const auto& v) { dst = to_real(k, v); }; };
  auto integer = [](int& dst) -> Setter { return [&dst](const auto& k, const auto& v) { dst = to_int(k, v); }; };
  const std::map<std::string, Setter> setters{
      {"mesh.path", [&](const auto&, const auto& v) { cfg.mesh.path = v; }},
      {"mesh.generator", [&](const auto&, const auto& v) { generator = v; }},
      {"mesh.channel_length", real(ch.length)},
      {"mesh.channel_height", real(ch.height)},
      {"mesh.obstacle",
       [&](const auto& k, const auto& v) {
         if (v == "circle") ch.obstacle = ObstacleKind::Circle;
         else if (v == "ellipse") ch.obstacle = ObstacleKind::Ellipse;
         else if (v == "none") ch.obstacle = ObstacleKind::None;
         else throw ConfigError(k + ": expected circle, ellipse or none, got '" + v + "'");
       }},
      {"mesh.diameter", [&](const auto& k, const auto& v) { diameter = to_real(k, v); }},
      {"mesh.semi_axis_x", real(ch.semi_axis_x)},
      {"mesh.semi_axis_y", real(ch.semi_axis_y)},
      {"mesh.boundary_nodes", integer(ch.boundary_nodes)},
      {"mesh.structured_layers", integer(ch.structured_layers)},
      {"mesh.growth", real(ch.growth)},
      {"mesh.max_size", real(ch.max_size)},
      {"mesh.target_cells", integer(cfg.mesh.target_cells)},
      {"fluid.density", real(fl.density)},
      {"fluid.viscosity", real(fl.viscosity)},
      {"fluid.inflow_x", [&](const auto& k, const auto& v) { fl.inflow.x() = to_real(k, v); }},
      {"fluid.inflow_y", [&](const auto& k, const auto& v) { fl.inflow.y() = to_real(k, v); }},
      {"flow.nonlinear_tolerance", real(fs.nonlinear_tolerance)},
      {"flow.max_picard_iterations", integer(fs.max_picard_iterations)},
      {"flow.linear_tolerance", real(fs.linear_tolerance)},
      {"flow.linear_max_iterations", integer(fs.linear_max_iterations)},
      {"plaplace.p", real(pl.p)},
      {"plaplace.eps_reg", real(pl.eps_reg)},
      {"plaplace.tolerance", real(pl.tolerance)},
      {"plaplace.max_iterations", integer(pl.max_iterations)},
      {"plaplace.schedule", [&](const auto& k, const auto& v) { pl.schedule = to_list(k, v); }},
      {"plaplace.continuation_tolerance", real(pl.continuation_tolerance)},
      {"auglag.rho_b", real(al.rho_b)},
      {"auglag.rho_c", real(al.rho_c)},
      {"auglag.rho_inc", real(al.rho_inc)},
      {"auglag.tau_b", real(al.tau_b)},
      {"auglag.tau_c", real(al.tau_c)},
      {"auglag.target_b_x", [&](const auto& k, const auto& v) { al.target_b.x() = to_real(k, v); }},
      {"auglag.target_b_y", [&](const auto& k, const auto& v) { al.target_b.y() = to_real(k, v); }},
      {"auglag.target_volume", [&](const auto& k, const auto& v) { target_volume = to_real(k, v); }},
      {"auglag.lambda_b_x", [&](const auto& k, const auto& v) { al.lambda_b.x() = to_real(k, v); }},
      {"auglag.lambda_b_y", [&](const auto& k, const auto& v) { al.lambda_b.y() = to_real(k, v); }},
      {"auglag.lambda_c", real(al.lambda_c)},
      {"optimizer.step_size", real(al.step_size)},
      {"optimizer.eps_sequence", [&](const auto& k, const auto& v) { op.eps_sequence = to_list(k, v); }},
      {"optimizer.max_design_steps", integer(op.max_design_steps)},
      {"optimizer.max_outer_steps", integer(op.max_outer_steps)},
      {"optimizer.max_total_steps", integer(op.max_total_steps)},
      {"optimizer.max_step_retries", integer(op.max_step_retries)},
      {"output.dir", [&](const auto&, const auto& v) { cfg.output_dir = v; }},
      {"output.checkpoint_every", integer(cfg.checkpoint_every)},
  };

  for (const auto& [key, entry] : entries) {
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError(source + ":" + std::to_string(entry.second) + ": unknown key '" + key + "'");
    it->second(key, entry.first);
  }

  // required keys and cross-field rules
  require(entries.count("plaplace.p") > 0, "plaplace.p", "missing key");
  const bool has_path = !cfg.mesh.path.empty();
  require(has_path || !generator.empty(), "mesh.path", "missing key (or set mesh.generator = channel)");
  require(!(has_path && !generator.empty()), "mesh.generator", "give either mesh.path or mesh.generator, not both");
  require(generator.empty() || generator == "channel", "mesh.generator", "only 'channel' is available");
  if (has_path && cfg.mesh.path.is_relative() && !base_dir.empty()) cfg.mesh.path = base_dir / cfg.mesh.path;
  if (diameter) {
    require(*diameter > 0.0, "mesh.diameter", "must be > 0");
    ch.semi_axis_x = ch.semi_axis_y = 0.5 * *diameter;
  }

  require(pl.p >= 2.0, "plaplace.p", "p must be ≥ 2");
  require(pl.eps_reg >= 0.0, "plaplace.eps_reg", "must be ≥ 0");
  require(pl.tolerance > 0.0, "plaplace.tolerance", "must be > 0");
  require(pl.continuation_tolerance > 0.0, "plaplace.continuation_tolerance", "must be > 0");
  require(pl.max_iterations >= 1, "plaplace.max_iterations", "must be ≥ 1");
  try {
    check(pl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plaplace.schedule: ") + e.what());
  }
  require(fl.density >= 0.0, "fluid.density", "must be ≥ 0");
  require(fl.viscosity > 0.0, "fluid.viscosity", "must be > 0");
  require(fl.inflow.norm() > 0.0, "fluid.inflow_x", "inflow velocity must be nonzero");
  require(fs.nonlinear_tolerance > 0.0, "flow.nonlinear_tolerance", "must be > 0");
  require(fs.linear_tolerance > 0.0, "flow.linear_tolerance", "must be > 0");
  require(fs.max_picard_iterations >= 1, "flow.max_picard_iterations", "must be ≥ 1");
  require(fs.linear_max_iterations >= 0, "flow.linear_max_iterations", "must be ≥ 0");
  require(al.rho_b > 0.0, "auglag.rho_b", "must be > 0");
  require(al.rho_c > 0.0, "auglag.rho_c", "must be > 0");
  require(al.rho_inc > 1.0, "auglag.rho_inc", "must be > 1");
  require(al.tau_b > 0.0, "auglag.tau_b", "must be > 0");
  require(al.tau_c > 0.0, "auglag.tau_c", "must be > 0");
  require(al.step_size > 0.0, "optimizer.step_size", "must be > 0");
  for (std::size_t i = 0; i < op.eps_sequence.size(); ++i) {
    require(op.eps_sequence[i] > 0.0, "optimizer.eps_sequence", "values must be > 0");
    require(i == 0 || op.eps_sequence[i] < op.eps_sequence[i - 1], "optimizer.eps_sequence",
            "must be strictly decreasing");
  }
  require(op.max_design_steps >= 1, "optimizer.max_design_steps", "must be ≥ 1");
  require(op.max_outer_steps >= 1, "optimizer.max_outer_steps", "must be ≥ 1");
  require(op.max_total_steps >= 0, "optimizer.max_total_steps", "must be ≥ 0");
  require(op.max_step_retries >= 0, "optimizer.max_step_retries", "must be ≥ 0");
  require(cfg.checkpoint_every >= 0, "output.checkpoint_every", "must be ≥ 0");
  if (!has_path) {
    require(ch.length > 0.0, "mesh.channel_length", "must be > 0");
    require(ch.height > 0.0, "mesh.channel_height", "must be > 0");
    require(ch.semi_axis_x > 0.0 && ch.semi_axis_y > 0.0, "mesh.semi_axis_x", "obstacle axes must be > 0");
    require(ch.boundary_nodes >= 8 && ch.boundary_nodes % 2 == 0, "mesh.boundary_nodes", "must be even and ≥ 8");
    require(ch.structured_layers >= 1, "mesh.structured_layers", "must be ≥ 1");
    require(ch.growth > 1.0, "mesh.growth", "must be > 1");
    require(ch.max_size > 0.0, "mesh.max_size", "must be > 0");
    require(cfg.mesh.target_cells >= 0, "mesh.target_cells", "must be ≥ 0");
    require(2.0 * ch.semi_axis_x < ch.height && 2.0 * ch.semi_axis_y < ch.height, "mesh.diameter",
            "obstacle must fit well inside the channel");
  }

  if (target_volume) {
    require(*target_volume > 0.0, "auglag.target_volume", "must be > 0");
    al.target_volume = *target_volume;
  } else if (!has_path) {
    al.target_volume = ch.length * ch.height - obstacle_area(ch);
  } else {
    cfg.target_volume_from_mesh = true;
  }
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  return parse_config(in, path.string(), path.parent_path());
}

Mesh build_mesh(const MeshSource& source) {
  if (!source.path.empty())
    return load_mesh(source.path, source.path.extension() == ".msh" ? MeshFormat::GmshV2 : MeshFormat::NativeText);
  const ChannelSpec spec = source.target_cells > 0 ? fit_cell_count(source.channel, source.target_cells)
                                                  : source.channel;
  return generate_channel_mesh(spec);
}

}  // namespace pshape
