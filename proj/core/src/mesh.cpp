#include "dtv/mesh.hpp"

#include "dtv/s2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <utility>

namespace dtv {

namespace {

// area_eps = 1e-12 * (bounding box diagonal)^2; triangles below abort the run.
double degenerate_area_threshold(const SurfaceMesh& mesh) {
  const double diag = mesh.bounding_box_diagonal();
  return 1e-12 * diag * diag;
}

void check_degenerate(const SurfaceMesh& mesh) {
  const double area_eps = degenerate_area_threshold(mesh);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    if (mesh.facet_area(t) < area_eps) {
      throw MeshError("degenerate triangle #" + std::to_string(t));
    }
  }
}

}  // namespace

Vec3 SurfaceMesh::facet_normal(int t) const {
  const auto& tri = triangles[t];
  const Vec3 u = vertices[tri[1]] - vertices[tri[0]];
  const Vec3 v = vertices[tri[2]] - vertices[tri[0]];
  return u.cross(v).normalized();
}

double SurfaceMesh::facet_area(int t) const {
  const auto& tri = triangles[t];
  const Vec3 u = vertices[tri[1]] - vertices[tri[0]];
  const Vec3 v = vertices[tri[2]] - vertices[tri[0]];
  return 0.5 * u.cross(v).norm();
}

double SurfaceMesh::bounding_box_diagonal() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& x : vertices) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).norm();
}

double SurfaceMesh::average_edge_length() const {
  double total = 0.0;
  for (const OrientedEdge& e : edges) total += (vertices[e.a] - vertices[e.b]).norm();
  return edges.empty() ? 0.0 : total / static_cast<double>(edges.size());
}

void SurfaceMesh::finalize() {
  const int nv = n_vertices();
  for (const auto& tri : triangles) {
    for (int v : tri) {
      if (v < 0 || v >= nv) throw MeshError("triangle references invalid vertex index");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw MeshError("triangle with repeated vertex");
    }
  }

  // Collect directed edges; each undirected edge must appear exactly once in
  // each direction (closed, consistently oriented, manifold).
  std::map<std::pair<int, int>, int> directed;  // (from, to) -> triangle
  for (int t = 0; t < n_triangles(); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int from = tri[k];
      const int to = tri[(k + 1) % 3];
      auto [it, inserted] = directed.emplace(std::make_pair(from, to), t);
      (void)it;
      if (!inserted) {
        throw MeshError("non-manifold or inconsistently oriented edge (" +
                        std::to_string(from) + "," + std::to_string(to) +
                        ") appears in more than one triangle in the same direction");
      }
    }
  }

  edges.clear();
  for (const auto& [key, tplus] : directed) {
    const auto [from, to] = key;
    if (from > to) continue;  // handled from the (min,max) direction
    auto rev = directed.find(std::make_pair(to, from));
    if (rev == directed.end()) {
      throw MeshError("boundary edge (" + std::to_string(from) + "," +
                      std::to_string(to) + "): mesh is not closed");
    }
    OrientedEdge e;
    e.a = from;
    e.b = to;
    e.facet_plus = tplus;       // edge appears ascending in F+
    e.facet_minus = rev->second;
    if (e.facet_plus == e.facet_minus) throw MeshError("edge with identical facets");
    edges.push_back(e);
  }

  if (n_vertices() > 0) check_degenerate(*this);
}

SurfaceMesh SurfaceMesh::with_vertices(const std::vector<Vec3>& new_vertices) const {
  if (static_cast<int>(new_vertices.size()) != n_vertices()) {
    throw MeshError("with_vertices: vertex count mismatch");
  }
  SurfaceMesh out = *this;
  out.vertices = new_vertices;
  check_degenerate(out);
  return out;
}

std::vector<EdgeGeometry> compute_edge_geometry(const SurfaceMesh& mesh) {
  const double area_eps = 1e-12 * std::pow(mesh.bounding_box_diagonal(), 2);
  std::vector<EdgeGeometry> out(mesh.edges.size());
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const OrientedEdge& e = mesh.edges[i];
    EdgeGeometry& g = out[i];
    const Vec3 edge_vec = mesh.vertices[e.b] - mesh.vertices[e.a];
    g.length = edge_vec.norm();
    if (mesh.facet_area(e.facet_plus) < area_eps || mesh.facet_area(e.facet_minus) < area_eps) {
      throw MeshError("degenerate triangle at edge #" + std::to_string(i));
    }
    g.n_plus = mesh.facet_normal(e.facet_plus);
    g.n_minus = mesh.facet_normal(e.facet_minus);
    g.theta = s2::geodesic_distance(g.n_plus, g.n_minus);
    // Co-normal: in the facet plane, orthogonal to E, pointing out of the facet.
    // In F+, the directed edge a->b runs counterclockwise, so n+ x (b-a)
    // points into the facet.
    const Vec3 t = edge_vec / g.length;
    g.mu_plus = -g.n_plus.cross(t).normalized();
    g.mu_minus = g.n_minus.cross(t).normalized();
  }
  return out;
}

VertexField vertex_normals(const SurfaceMesh& mesh) {
  VertexField normals(mesh.vertices.size(), Vec3::Zero());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 n = mesh.facet_normal(t);
    for (int k = 0; k < 3; ++k) {
      const Vec3& x = mesh.vertices[tri[k]];
      const Vec3 u = (mesh.vertices[tri[(k + 1) % 3]] - x).normalized();
      const Vec3 v = (mesh.vertices[tri[(k + 2) % 3]] - x).normalized();
      const double angle = std::acos(s2::clamp_unit(u.dot(v)));
      normals[tri[k]] += angle * n;
    }
  }
  for (Vec3& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

SurfaceMesh add_vertex_noise(const SurfaceMesh& mesh, double sigma_rel, std::uint64_t seed) {
  if (sigma_rel < 0.0) throw MeshError("add_vertex_noise: sigma_rel must be >= 0");
  if (sigma_rel == 0.0) return mesh;
  const double sigma = sigma_rel * mesh.average_edge_length();
  const VertexField normals = vertex_normals(mesh);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<Vec3> moved = mesh.vertices;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    moved[i] += gauss(rng) * normals[i];
  }
  SurfaceMesh out = mesh;
  out.vertices = std::move(moved);
  return out;
}

double TetMesh::tet_volume(int t) const {
  const auto& tet = tets[t];
  const Vec3 a = vertices[tet[1]] - vertices[tet[0]];
  const Vec3 b = vertices[tet[2]] - vertices[tet[0]];
  const Vec3 c = vertices[tet[3]] - vertices[tet[0]];
  return a.cross(b).dot(c) / 6.0;
}

void TetMesh::validate() const {
  const int nv = n_vertices();
  for (int t = 0; t < n_tets(); ++t) {
    for (int v : tets[t]) {
      if (v < 0 || v >= nv) throw MeshError("tet references invalid vertex index");
    }
    if (tet_volume(t) <= 0.0) {
      throw MeshError("non-positive tet volume at tet #" + std::to_string(t));
    }
  }
  if (boundary_triangles.size() != boundary_tags.size()) {
    throw MeshError("boundary triangle/tag count mismatch");
  }
  for (int tag : boundary_tags) {
    if (tag != 1 && tag != 2) throw MeshError("boundary tag must be 1 or 2");
  }

  // Every face shared by one tet only must carry a tag, and tagged triangles
  // must be actual boundary faces.
  std::map<std::array<int, 3>, int> face_count;
  auto key = [](int a, int b, int c) {
    std::array<int, 3> k{a, b, c};
    std::sort(k.begin(), k.end());
    return k;
  };
  static const int faces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (const auto& tet : tets) {
    for (const auto& f : faces) {
      ++face_count[key(tet[f[0]], tet[f[1]], tet[f[2]])];
    }
  }
  std::map<std::array<int, 3>, int> tagged;
  for (std::size_t i = 0; i < boundary_triangles.size(); ++i) {
    const auto& t = boundary_triangles[i];
    tagged[key(t[0], t[1], t[2])] = boundary_tags[i];
  }
  int n_boundary_faces = 0;
  for (const auto& [k, count] : face_count) {
    if (count == 1) {
      ++n_boundary_faces;
      if (tagged.find(k) == tagged.end()) {
        throw MeshError("untagged boundary facet");
      }
    } else if (count != 2) {
      throw MeshError("non-manifold interior face");
    }
  }
  if (n_boundary_faces != static_cast<int>(boundary_triangles.size())) {
    throw MeshError("tagged triangle is not a boundary facet");
  }
}

InterfaceMap extract_interface(const TetMesh& mesh) {
  InterfaceMap out;
  std::vector<int> volume_to_surface(mesh.vertices.size(), -1);
  for (std::size_t i = 0; i < mesh.boundary_triangles.size(); ++i) {
    if (mesh.boundary_tags[i] != 1) continue;
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.boundary_triangles[i][k];
      if (volume_to_surface[v] < 0) {
        volume_to_surface[v] = static_cast<int>(out.surface_to_volume.size());
        out.surface_to_volume.push_back(v);
        out.surface.vertices.push_back(mesh.vertices[v]);
      }
      tri[k] = volume_to_surface[v];
    }
    out.surface.triangles.push_back(tri);
  }
  if (out.surface.triangles.empty()) throw MeshError("no Gamma_1 facets tagged");
  out.surface.finalize();  // throws if Gamma_1 is not closed
  return out;
}

}  // namespace dtv
