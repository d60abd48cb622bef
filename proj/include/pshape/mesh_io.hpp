#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "pshape/mesh.hpp"

namespace pshape {

enum class MeshFormat { NativeText, GmshV2 };

/// Reads and validates a mesh. Errors carry "<path>:<line>: ..." locations.
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format = MeshFormat::NativeText);

/// Parses the native text format:
///   nodes N cells M bedges K
///   x y              (N lines)
///   i j k            (M lines, counterclockwise)
///   i j TAG          (K lines, TAG in inflow|outflow|slip|design)
Mesh parse_native_mesh(std::istream& in, const std::string& source = "<stream>");

/// Gmsh 2.2 ASCII. Line elements carry the boundary tag through their
/// physical group, resolved by name via $PhysicalNames when present and
/// otherwise by number (1 inflow, 2 outflow, 3 slip, 4 design).
Mesh parse_gmsh_mesh(std::istream& in, const std::string& source = "<stream>");

void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
void write_native_mesh(const Mesh& mesh, std::ostream& out);

struct VtkField {
  std::string name;
  std::variant<std::vector<double>, std::vector<Vec2>> values;
};

struct VtkFields {
  std::vector<VtkField> point;
  std::vector<VtkField> cell;
};

/// Legacy ASCII 2.0 unstructured grid, floats written with "%.9e".
void write_vtk(const Mesh& mesh, const VtkFields& fields, const std::filesystem::path& path);
void write_vtk(const Mesh& mesh, const VtkFields& fields, std::ostream& out);

/// "%.9e"
std::string format_real(double value);

/// Writes through a sibling temporary file and renames it into place.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

}  // namespace pshape
