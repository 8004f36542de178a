#include "dtv/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace dtv {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  return out;
}

// Next non-empty, non-comment line of an OFF file.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find('#');
    if (pos != std::string::npos) line.erase(pos);
    std::istringstream probe(line);
    std::string token;
    if (probe >> token) return true;
  }
  return false;
}

}  // namespace

SurfaceMesh read_off(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw MeshError(path + ": empty file");
  {
    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic != "OFF") throw MeshError(path + ": not an OFF file");
  }
  if (!next_line(in, line)) throw MeshError(path + ": missing counts");
  std::size_t nv = 0, nf = 0, ne = 0;
  {
    std::istringstream counts(line);
    if (!(counts >> nv >> nf >> ne)) throw MeshError(path + ": bad counts line");
  }
  SurfaceMesh mesh;
  mesh.vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_line(in, line)) throw MeshError(path + ": truncated vertex list");
    std::istringstream v(line);
    Vec3 x;
    if (!(v >> x[0] >> x[1] >> x[2])) throw MeshError(path + ": bad vertex line");
    mesh.vertices.push_back(x);
  }
  mesh.triangles.reserve(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    if (!next_line(in, line)) throw MeshError(path + ": truncated facet list");
    std::istringstream f(line);
    int count = 0;
    if (!(f >> count)) throw MeshError(path + ": bad facet line");
    if (count != 3) throw MeshError(path + ": non-triangular facet");
    std::array<int, 3> tri{};
    if (!(f >> tri[0] >> tri[1] >> tri[2])) throw MeshError(path + ": bad facet line");
    mesh.triangles.push_back(tri);
  }
  mesh.finalize();
  return mesh;
}

void write_off(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "OFF\n" << mesh.n_vertices() << " " << mesh.n_triangles() << " 0\n";
  for (const Vec3& x : mesh.vertices) {
    out << x[0] << " " << x[1] << " " << x[2] << "\n";
  }
  for (const auto& tri : mesh.triangles) {
    out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  }
}

void write_ply(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.n_vertices() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.n_triangles() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& x : mesh.vertices) {
    out << x[0] << " " << x[1] << " " << x[2] << "\n";
  }
  for (const auto& tri : mesh.triangles) {
    out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  }
}

// Gmsh MSH v2 ASCII with physical groups 1 (Gamma_1) and 2 (Gamma_2) on
// boundary triangles. Element types: 2 = triangle, 4 = tetrahedron.
TetMesh read_msh2(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  TetMesh mesh;
  bool saw_nodes = false, saw_elements = false;
  while (std::getline(in, line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      std::getline(in, line);
      std::istringstream fmt(line);
      double version = 0;
      int file_type = -1, data_size = 0;
      fmt >> version >> file_type >> data_size;
      if (version < 2.0 || version >= 3.0 || file_type != 0) {
        throw MeshError(path + ": expected MSH v2 ASCII");
      }
      std::getline(in, line);  // $EndMeshFormat
    } else if (line.rfind("$Nodes", 0) == 0) {
      saw_nodes = true;
      std::getline(in, line);
      std::size_t n = std::stoul(line);
      mesh.vertices.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream node(line);
        std::size_t id;
        Vec3 x;
        if (!(node >> id >> x[0] >> x[1] >> x[2]) || id < 1 || id > n) {
          throw MeshError(path + ": bad node line (ids must be 1..n)");
        }
        mesh.vertices[id - 1] = x;
      }
      std::getline(in, line);  // $EndNodes
    } else if (line.rfind("$Elements", 0) == 0) {
      saw_elements = true;
      std::getline(in, line);
      std::size_t n = std::stoul(line);
      for (std::size_t i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream el(line);
        std::size_t id;
        int type = 0, ntags = 0;
        if (!(el >> id >> type >> ntags)) throw MeshError(path + ": bad element line");
        int physical = 0;
        for (int k = 0; k < ntags; ++k) {
          int tag;
          if (!(el >> tag)) throw MeshError(path + ": bad element tags");
          if (k == 0) physical = tag;
        }
        if (type == 2) {
          std::array<int, 3> tri{};
          if (!(el >> tri[0] >> tri[1] >> tri[2])) throw MeshError(path + ": bad triangle");
          for (int& v : tri) --v;
          mesh.boundary_triangles.push_back(tri);
          mesh.boundary_tags.push_back(physical);
        } else if (type == 4) {
          std::array<int, 4> tet{};
          if (!(el >> tet[0] >> tet[1] >> tet[2] >> tet[3])) throw MeshError(path + ": bad tet");
          for (int& v : tet) --v;
          mesh.tets.push_back(tet);
        }
        // other element types (points, lines) are ignored
      }
      std::getline(in, line);  // $EndElements
    }
  }
  if (!saw_nodes || !saw_elements) throw MeshError(path + ": missing $Nodes or $Elements");
  mesh.validate();
  return mesh;
}

void write_msh2(const TetMesh& mesh, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.n_vertices() << "\n";
  for (int i = 0; i < mesh.n_vertices(); ++i) {
    const Vec3& x = mesh.vertices[i];
    out << (i + 1) << " " << x[0] << " " << x[1] << " " << x[2] << "\n";
  }
  out << "$EndNodes\n$Elements\n"
      << (mesh.boundary_triangles.size() + mesh.tets.size()) << "\n";
  std::size_t id = 1;
  for (std::size_t i = 0; i < mesh.boundary_triangles.size(); ++i, ++id) {
    const auto& t = mesh.boundary_triangles[i];
    const int tag = mesh.boundary_tags[i];
    out << id << " 2 2 " << tag << " " << tag << " " << (t[0] + 1) << " " << (t[1] + 1)
        << " " << (t[2] + 1) << "\n";
  }
  for (const auto& t : mesh.tets) {
    out << id++ << " 4 2 0 0 " << (t[0] + 1) << " " << (t[1] + 1) << " " << (t[2] + 1)
        << " " << (t[3] + 1) << "\n";
  }
  out << "$EndElements\n";
}

}  // namespace dtv
