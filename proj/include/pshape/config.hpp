#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>

#include "pshape/mesh_gen.hpp"
#include "pshape/optimizer.hpp"

namespace pshape {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeshSource {
  std::filesystem::path path;  // empty: use the generator
  ChannelSpec channel;
  int target_cells = 0;  // > 0: pick the obstacle resolution to match
};

struct RunConfig {
  MeshSource mesh;
  SolverSuite solvers;
  OptimizerConfig optimizer;
  std::filesystem::path output_dir = "out";
  int checkpoint_every = 0;
  bool target_volume_from_mesh = false;  // no auglag.target_volume with a mesh file
};

/// Flat text, one `key = value` per line, `#` starts a comment. Keys are
/// dotted (auglag.rho_b). Unknown or repeated keys, malformed numbers and
/// out-of-range values are errors naming the key. plaplace.p and a mesh
/// source (mesh.path or mesh.generator) are required. Relative mesh paths
/// are resolved against `base_dir`.
RunConfig parse_config(std::istream& in, const std::string& source = "config",
                       const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

/// Loads (Gmsh for *.msh, native otherwise) or generates the initial mesh.
Mesh build_mesh(const MeshSource& source);

}  // namespace pshape
