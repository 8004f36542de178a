#include "dtv/functionals.hpp"

#include "dtv/s2.hpp"

#include <cmath>
#include <stdexcept>

namespace dtv {

namespace {

// cot of the angle opposite to edge (a, b) in triangle `tri`.
double opposite_cotangent(const SurfaceMesh& mesh, const std::array<int, 3>& tri, int a, int b) {
  int c = -1;
  for (int v : tri) {
    if (v != a && v != b) c = v;
  }
  if (c < 0) throw MeshError("edge endpoints not part of adjacent triangle");
  const Vec3 u = mesh.vertices[a] - mesh.vertices[c];
  const Vec3 v = mesh.vertices[b] - mesh.vertices[c];
  const double cross = u.cross(v).norm();
  if (cross < 1e-12 * u.norm() * v.norm()) {
    throw MeshError("degenerate cotangent (zero triangle area)");
  }
  return u.dot(v) / cross;
}

}  // namespace

FunctionalValue dtv(const SurfaceMesh& mesh, bool per_edge) {
  const auto geometry = compute_edge_geometry(mesh);
  FunctionalValue out;
  if (per_edge) out.per_edge.emplace();
  for (const EdgeGeometry& g : geometry) {
    const double h = g.theta * g.length;
    out.value += h;
    if (per_edge) out.per_edge->push_back(h);
  }
  return out;
}

FunctionalValue dtv_euclidean(const SurfaceMesh& mesh, bool per_edge) {
  const auto geometry = compute_edge_geometry(mesh);
  FunctionalValue out;
  if (per_edge) out.per_edge.emplace();
  for (const EdgeGeometry& g : geometry) {
    const double h = (g.n_plus - g.n_minus).norm() * g.length;
    out.value += h;
    if (per_edge) out.per_edge->push_back(h);
  }
  return out;
}

FunctionalValue surface_area(const SurfaceMesh& mesh) {
  FunctionalValue out;
  for (int t = 0; t < mesh.n_triangles(); ++t) out.value += mesh.facet_area(t);
  return out;
}

std::pair<double, double> dtv_scaling_check(const SurfaceMesh& mesh, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("dtv_scaling_check: alpha must be positive");
  std::vector<Vec3> scaled = mesh.vertices;
  for (Vec3& x : scaled) x *= alpha;
  return {dtv(mesh.with_vertices(scaled)).value, alpha * dtv(mesh).value};
}

VertexField lagrangian_gradient(const SurfaceMesh& mesh, double mu) {
  const auto geometry = compute_edge_geometry(mesh);
  VertexField grad(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const OrientedEdge& e = mesh.edges[i];
    const EdgeGeometry& g = geometry[i];
    const double cot_sum = opposite_cotangent(mesh, mesh.triangles[e.facet_plus], e.a, e.b) +
                           opposite_cotangent(mesh, mesh.triangles[e.facet_minus], e.a, e.b);
    const double w = g.theta / g.length + 0.5 * mu * cot_sum;
    const Vec3 diff = mesh.vertices[e.a] - mesh.vertices[e.b];
    grad[e.a] += w * diff;
    grad[e.b] -= w * diff;
  }
  return grad;
}

VertexField area_gradient(const SurfaceMesh& mesh) {
  VertexField grad(mesh.vertices.size(), Vec3::Zero());
  for (const OrientedEdge& e : mesh.edges) {
    const double cot_sum = opposite_cotangent(mesh, mesh.triangles[e.facet_plus], e.a, e.b) +
                           opposite_cotangent(mesh, mesh.triangles[e.facet_minus], e.a, e.b);
    const Vec3 diff = mesh.vertices[e.a] - mesh.vertices[e.b];
    grad[e.a] += 0.5 * cot_sum * diff;
    grad[e.b] -= 0.5 * cot_sum * diff;
  }
  return grad;
}

std::pair<double, VertexField> denoise_loss(const SurfaceMesh& mesh,
                                            const DenoiseProblem& problem) {
  if (problem.noisy_targets.size() != mesh.vertices.size()) {
    throw std::invalid_argument("denoise_loss: vertex count mismatch");
  }
  double value = 0.0;
  VertexField grad(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 diff = mesh.vertices[i] - problem.noisy_targets[i];
    value += 0.5 * diff.squaredNorm();
    grad[i] = diff;
  }
  return {value, grad};
}

}  // namespace dtv
