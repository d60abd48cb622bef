#include "pshape/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace pshape {

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-blank line that is not a '#' comment.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw MeshError(source_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  int line_no() const { return line_no_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

void require_line(LineReader& reader, std::string& line, const char* what) {
  if (!reader.next(line)) reader.fail(std::string("unexpected end of file, expected ") + what);
}

void check_trailing(LineReader& reader, std::istringstream& ss) {
  std::string extra;
  if (ss >> extra) reader.fail("unexpected trailing token '" + extra + "'");
}

/// Runs topology validation and attaches the source name to any failure.
void validate_from(Mesh& mesh, const std::string& source) {
  try {
    validate(mesh);
  } catch (const InvertedCellError&) {
    throw;
  } catch (const MeshError& e) {
    throw MeshError(source + ": " + e.what());
  }
}

}  // namespace

Mesh parse_native_mesh(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  std::string line;
  require_line(reader, line, "header");

  std::istringstream header(line);
  std::string w_nodes, w_cells, w_bedges;
  long n = -1, m = -1, k = -1;
  if (!(header >> w_nodes >> n >> w_cells >> m >> w_bedges >> k) || w_nodes != "nodes" ||
      w_cells != "cells" || w_bedges != "bedges" || n < 0 || m < 0 || k < 0) {
    reader.fail("expected header 'nodes N cells M bedges K'");
  }
  check_trailing(reader, header);

  Mesh mesh;
  mesh.nodes.reserve(n);
  for (long i = 0; i < n; ++i) {
    require_line(reader, line, "node line");
    std::istringstream ss(line);
    double x, y;
    if (!(ss >> x >> y)) reader.fail("malformed node line");
    check_trailing(reader, ss);
    mesh.nodes.emplace_back(x, y);
  }

  std::vector<int> cell_lines;
  mesh.triangles.reserve(m);
  for (long c = 0; c < m; ++c) {
    require_line(reader, line, "cell line");
    std::istringstream ss(line);
    std::array<int, 3> t;
    if (!(ss >> t[0] >> t[1] >> t[2])) reader.fail("malformed cell line");
    check_trailing(reader, ss);
    for (int v : t) {
      if (v < 0 || v >= n) reader.fail("node index " + std::to_string(v) + " out of range");
    }
    const double area = signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
    if (!(area > 0.0)) reader.fail("inverted cell " + std::to_string(c));
    mesh.triangles.push_back(t);
    cell_lines.push_back(reader.line_no());
  }

  mesh.boundary_edges.reserve(k);
  for (long e = 0; e < k; ++e) {
    require_line(reader, line, "boundary edge line");
    std::istringstream ss(line);
    int a, b;
    std::string word;
    if (!(ss >> a >> b >> word)) reader.fail("malformed boundary edge line");
    check_trailing(reader, ss);
    if (a < 0 || a >= n || b < 0 || b >= n) reader.fail("boundary edge node out of range");
    const auto tag = parse_boundary_tag(word);
    if (!tag) reader.fail("unknown boundary tag '" + word + "'");
    mesh.boundary_edges.push_back({{a, b}, *tag});
  }
  if (reader.next(line)) reader.fail("unexpected content after boundary edges");

  validate_from(mesh, source);
  return mesh;
}

Mesh parse_gmsh_mesh(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  std::string line;
  std::map<int, BoundaryTag> physical;
  std::map<long, int> node_index;
  Mesh mesh;

  auto expect_end = [&](const std::string& end_marker) {
    require_line(reader, line, end_marker.c_str());
    if (line.rfind(end_marker, 0) != 0) reader.fail("expected " + end_marker);
  };

  bool have_elements = false;
  while (reader.next(line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      require_line(reader, line, "format line");
      std::istringstream ss(line);
      double version;
      int file_type;
      if (!(ss >> version >> file_type) || version < 2.0 || version >= 3.0 || file_type != 0) {
        reader.fail("only Gmsh 2.x ASCII files are supported");
      }
      expect_end("$EndMeshFormat");
    } else if (line.rfind("$PhysicalNames", 0) == 0) {
      require_line(reader, line, "physical name count");
      const long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        require_line(reader, line, "physical name");
        std::istringstream ss(line);
        int dim, id;
        std::string name;
        if (!(ss >> dim >> id >> name)) reader.fail("malformed physical name");
        if (name.size() >= 2 && name.front() == '"') name = name.substr(1, name.size() - 2);
        if (dim != 1) continue;
        const auto tag = parse_boundary_tag(name);
        if (!tag) reader.fail("unknown boundary physical name '" + name + "'");
        physical[id] = *tag;
      }
      expect_end("$EndPhysicalNames");
    } else if (line.rfind("$Nodes", 0) == 0) {
      require_line(reader, line, "node count");
      const long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        require_line(reader, line, "node");
        std::istringstream ss(line);
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) reader.fail("malformed node");
        node_index[id] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.emplace_back(x, y);
      }
      expect_end("$EndNodes");
    } else if (line.rfind("$Elements", 0) == 0) {
      have_elements = true;
      require_line(reader, line, "element count");
      const long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        require_line(reader, line, "element");
        std::istringstream ss(line);
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags)) reader.fail("malformed element");
        std::vector<long> tags(ntags);
        for (auto& t : tags) ss >> t;
        const int nv = type == 1 ? 2 : type == 2 ? 3 : type == 15 ? 1 : -1;
        if (nv < 0) reader.fail("unsupported element type " + std::to_string(type));
        std::vector<int> v(nv);
        for (auto& x : v) {
          long raw;
          if (!(ss >> raw)) reader.fail("malformed element connectivity");
          auto it = node_index.find(raw);
          if (it == node_index.end()) reader.fail("unknown node " + std::to_string(raw));
          x = it->second;
        }
        if (type == 1) {
          if (tags.empty()) reader.fail("untagged boundary element");
          const int group = static_cast<int>(tags[0]);
          BoundaryTag tag;
          if (auto it = physical.find(group); it != physical.end()) {
            tag = it->second;
          } else if (physical.empty() && group >= 1 && group <= 4) {
            constexpr BoundaryTag by_number[] = {BoundaryTag::Inflow, BoundaryTag::Outflow,
                                                 BoundaryTag::SlipWall, BoundaryTag::Design};
            tag = by_number[group - 1];
          } else {
            reader.fail("physical group " + std::to_string(group) + " has no boundary tag");
          }
          mesh.boundary_edges.push_back({{v[0], v[1]}, tag});
        } else if (type == 2) {
          const std::array<int, 3> t{v[0], v[1], v[2]};
          const double area = signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
          if (!(area > 0.0)) {
            reader.fail("inverted cell " + std::to_string(mesh.triangles.size()));
          }
          mesh.triangles.push_back(t);
        }
      }
      expect_end("$EndElements");
    }
  }
  if (!have_elements) throw MeshError(source + ": no $Elements section");
  validate_from(mesh, source);
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw MeshError(path.string() + ": cannot open mesh file");
  return format == MeshFormat::GmshV2 ? parse_gmsh_mesh(in, path.string())
                                      : parse_native_mesh(in, path.string());
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9e", value);
  return buf;
}

void write_native_mesh(const Mesh& mesh, std::ostream& out) {
  out << "nodes " << mesh.node_count() << " cells " << mesh.cell_count() << " bedges "
      << mesh.boundary_edges.size() << '\n';
  for (const auto& p : mesh.nodes) out << format_real(p.x()) << ' ' << format_real(p.y()) << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) {
    out << e.nodes[0] << ' ' << e.nodes[1] << ' ' << to_string(e.tag) << '\n';
  }
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) { write_native_mesh(mesh, out); });
}

namespace {

void write_field(std::ostream& out, const VtkField& field, std::size_t expected) {
  std::visit(
      [&](const auto& values) {
        using T = std::decay_t<decltype(values)>;
        if (values.size() != expected) {
          throw std::invalid_argument("VTK field '" + field.name + "' has " +
                                      std::to_string(values.size()) + " values, expected " +
                                      std::to_string(expected));
        }
        if constexpr (std::is_same_v<T, std::vector<double>>) {
          out << "SCALARS " << field.name << " double 1\nLOOKUP_TABLE default\n";
          for (double v : values) out << format_real(v) << '\n';
        } else {
          out << "VECTORS " << field.name << " double\n";
          for (const auto& v : values) {
            out << format_real(v.x()) << ' ' << format_real(v.y()) << ' ' << format_real(0.0)
                << '\n';
          }
        }
      },
      field.values);
}

}  // namespace

void write_vtk(const Mesh& mesh, const VtkFields& fields, std::ostream& out) {
  const std::size_t n = mesh.node_count(), m = mesh.cell_count();
  out << "# vtk DataFile Version 2.0\npshape\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (const auto& p : mesh.nodes) {
    out << format_real(p.x()) << ' ' << format_real(p.y()) << ' ' << format_real(0.0) << '\n';
  }
  out << "CELLS " << m << ' ' << 4 * m << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << m << '\n';
  for (std::size_t c = 0; c < m; ++c) out << "5\n";
  if (!fields.point.empty()) {
    out << "POINT_DATA " << n << '\n';
    for (const auto& f : fields.point) write_field(out, f, n);
  }
  if (!fields.cell.empty()) {
    out << "CELL_DATA " << m << '\n';
    for (const auto& f : fields.cell) write_field(out, f, m);
  }
}

void write_vtk(const Mesh& mesh, const VtkFields& fields, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) { write_vtk(mesh, fields, out); });
}

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace pshape
