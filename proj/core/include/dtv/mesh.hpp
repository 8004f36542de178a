#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtv {

using Vec3 = Eigen::Vector3d;

/// One 3-vector per vertex (gradient, displacement, ...).
using VertexField = std::vector<Vec3>;

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Geometry degraded past the configured quality floor; the run aborts with
/// the best mesh so far (remeshing is out of scope).
struct MeshCorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Undirected edge with the fixed orientation convention: endpoints stored as
/// (min index, max index); facet_plus is the triangle in which the edge
/// appears in ascending vertex order.
struct OrientedEdge {
  int a = -1;            // a < b
  int b = -1;
  int facet_plus = -1;   // F_E+
  int facet_minus = -1;  // F_E-
};

/// Per-edge geometric cache.
struct EdgeGeometry {
  double length = 0.0;  // |E|
  Vec3 n_plus, n_minus;  // facet unit normals
  Vec3 mu_plus, mu_minus;  // unit co-normals, in-plane, pointing out of the facet
  double theta = 0.0;  // exterior dihedral angle = arccos(n+ . n-), in [0, pi]
};

/// Closed orientable triangle mesh. Vertices and triangles are set by the
/// caller (or a reader); finalize() validates the invariants and builds the
/// oriented edge table. Treat a finalized mesh as an immutable snapshot:
/// derive modified meshes via with_vertices().
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<OrientedEdge> edges;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  /// Checks closedness, consistent orientation and non-degeneracy, and builds
  /// the edge table. Throws MeshError on violation.
  void finalize();

  /// Same connectivity, new vertex positions (re-checks degeneracy only).
  SurfaceMesh with_vertices(const std::vector<Vec3>& new_vertices) const;

  Vec3 facet_normal(int t) const;
  double facet_area(int t) const;
  double bounding_box_diagonal() const;
  double average_edge_length() const;
};

/// Tetrahedral mesh with tagged boundary triangles: tag 1 for the interior
/// interface Gamma_1, tag 2 for the outer measurement boundary Gamma_2.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::array<int, 3>> boundary_triangles;  // oriented outward of the volume
  std::vector<int> boundary_tags;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }

  double tet_volume(int t) const;

  /// Positive tet volumes; boundary triangles tagged 1 or 2 and matching the
  /// facets of the tetrahedra that lie on the boundary.
  void validate() const;
};

/// Two-way map between a Gamma_1 surface mesh and its volume mesh.
struct InterfaceMap {
  SurfaceMesh surface;
  std::vector<int> surface_to_volume;  // per surface vertex: volume vertex index
};

/// Per-edge geometry for all edges; throws on degenerate triangles.
std::vector<EdgeGeometry> compute_edge_geometry(const SurfaceMesh& mesh);

/// Angle-weighted average of adjacent facet normals, normalized.
VertexField vertex_normals(const SurfaceMesh& mesh);

/// Moves each vertex along its average normal by a zero-mean Gaussian sample
/// with standard deviation sigma_rel * (average edge length). Deterministic
/// for a fixed seed.
SurfaceMesh add_vertex_noise(const SurfaceMesh& mesh, double sigma_rel, std::uint64_t seed);

/// Extracts the closed Gamma_1 surface of a tagged tet mesh, oriented to
/// point out of the volume (into the inclusion).
InterfaceMap extract_interface(const TetMesh& mesh);

// --- file IO (OFF surface, Gmsh MSH v2 ASCII volume, PLY export) ---

SurfaceMesh read_off(const std::string& path);
void write_off(const SurfaceMesh& mesh, const std::string& path);
void write_ply(const SurfaceMesh& mesh, const std::string& path);

TetMesh read_msh2(const std::string& path);
void write_msh2(const TetMesh& mesh, const std::string& path);

}  // namespace dtv
