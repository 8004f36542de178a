#include "dtv/shapegrad.hpp"

#include "dtv/s2.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <stdexcept>

namespace dtv {

namespace {

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
  return m;
}

}  // namespace

std::array<Mat3, 3> normal_jacobian(const Vec3& x0, const Vec3& x1, const Vec3& x2) {
  const Vec3 e1 = x1 - x0;
  const Vec3 e2 = x2 - x0;
  const Vec3 u = e1.cross(e2);
  const double len = u.norm();
  if (len < 1e-300) throw MeshError("normal_jacobian: degenerate triangle");
  const Vec3 n = u / len;
  const Mat3 projector = (Mat3::Identity() - n * n.transpose()) / len;
  return {projector * skew(e2 - e1), projector * (-skew(e2)), projector * skew(e1)};
}

LogDifferential log_map_differential(const Vec3& n, const Vec3& m) {
  const double c = s2::clamp_unit(n.dot(m));
  if (c < -1.0 + s2::kAntipodalEps) throw s2::AntipodalError("log_map_differential");
  const double theta = std::acos(c);
  double a, q;  // a = theta/sin(theta), q = (sin - theta cos)/sin^3
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    a = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
    q = 1.0 / 3.0 + 2.0 * t2 / 15.0;
  } else {
    const double s = std::sin(theta);
    a = theta / s;
    q = (s - theta * c) / (s * s * s);
  }
  const Vec3 w = m - c * n;
  const Vec3 coeff = -q * w - a * n;  // multiplies dc = m^T dn + n^T dm
  LogDifferential out;
  out.wrt_n = coeff * m.transpose() - a * c * Mat3::Identity();
  out.wrt_m = coeff * n.transpose() + a * Mat3::Identity();
  return out;
}

VertexField penalty_gradient(const SurfaceMesh& mesh, const std::vector<Vec3>& d,
                             const std::vector<Vec3>& b, double beta, double lambda) {
  if (d.size() != mesh.edges.size() || b.size() != mesh.edges.size()) {
    throw std::invalid_argument("penalty_gradient: per-edge field size mismatch");
  }
  const auto geometry = compute_edge_geometry(mesh);
  VertexField grad(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const OrientedEdge& e = mesh.edges[i];
    const EdgeGeometry& g = geometry[i];
    const Vec3 log_nm = s2::log_map(g.n_plus, g.n_minus, "penalty_gradient");
    const Vec3 r = d[i] - log_nm - b[i];

    // |E| derivative part: (beta |d| + (lambda/2) |r|^2) d|E|/dx
    const double edge_coeff = beta * d[i].norm() + 0.5 * lambda * r.squaredNorm();
    const Vec3 t = (mesh.vertices[e.b] - mesh.vertices[e.a]) / g.length;
    grad[e.b] += edge_coeff * t;
    grad[e.a] -= edge_coeff * t;

    // log derivative part: -lambda |E| r^T dlog, chained through the facet
    // normals of F+ and F-.
    const LogDifferential dlog = log_map_differential(g.n_plus, g.n_minus);
    const Vec3 w_plus = -lambda * g.length * dlog.wrt_n.transpose() * r;
    const Vec3 w_minus = -lambda * g.length * dlog.wrt_m.transpose() * r;
    for (int side = 0; side < 2; ++side) {
      const int facet = side == 0 ? e.facet_plus : e.facet_minus;
      const Vec3& w = side == 0 ? w_plus : w_minus;
      const auto& tri = mesh.triangles[facet];
      const auto jac = normal_jacobian(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                       mesh.vertices[tri[2]]);
      for (int k = 0; k < 3; ++k) {
        grad[tri[k]] += jac[k].transpose() * w;
      }
    }
  }
  return grad;
}

SurfaceOperatorCache SurfaceOperatorCache::assemble(const SurfaceMesh& mesh) {
  const int n = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> mass_entries, stiff_entries;
  mass_entries.reserve(mesh.triangles.size() * 9);
  stiff_entries.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const Vec3& x0 = mesh.vertices[tri[0]];
    const Vec3& x1 = mesh.vertices[tri[1]];
    const Vec3& x2 = mesh.vertices[tri[2]];
    const double area = 0.5 * (x1 - x0).cross(x2 - x0).norm();
    if (area <= 0.0) throw MeshError("surface assembly: degenerate triangle");
    // consistent P1 mass: area/12 * (1 + delta_ij)
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        mass_entries.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
    // cotangent stiffness
    const Vec3* x[3] = {&x0, &x1, &x2};
    for (int k = 0; k < 3; ++k) {
      const int i = (k + 1) % 3, j = (k + 2) % 3;
      const Vec3 u = *x[i] - *x[k];
      const Vec3 v = *x[j] - *x[k];
      const double cot = u.dot(v) / u.cross(v).norm();
      stiff_entries.emplace_back(tri[i], tri[j], -0.5 * cot);
      stiff_entries.emplace_back(tri[j], tri[i], -0.5 * cot);
      stiff_entries.emplace_back(tri[i], tri[i], 0.5 * cot);
      stiff_entries.emplace_back(tri[j], tri[j], 0.5 * cot);
    }
  }
  SurfaceOperatorCache cache;
  cache.mass.resize(n, n);
  cache.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
  cache.stiffness.resize(n, n);
  cache.stiffness.setFromTriplets(stiff_entries.begin(), stiff_entries.end());
  return cache;
}

VertexField h1_surface_gradient(const SurfaceOperatorCache& ops, const VertexField& rhs,
                                double h1_scale) {
  const Eigen::Index n = ops.mass.rows();
  if (static_cast<Eigen::Index>(rhs.size()) != n) {
    throw std::invalid_argument("h1_surface_gradient: rhs size mismatch");
  }
  const Eigen::SparseMatrix<double> op = h1_scale * ops.stiffness + ops.mass;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(10 * n);
  cg.compute(op);
  VertexField out(rhs.size());
  for (int comp = 0; comp < 3; ++comp) {
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) f[i] = rhs[i][comp];
    const Eigen::VectorXd w = cg.solve(f);
    if (cg.info() != Eigen::Success) {
      throw std::runtime_error("h1_surface_gradient: CG did not converge");
    }
    for (Eigen::Index i = 0; i < n; ++i) out[i][comp] = w[i];
  }
  return out;
}

VertexField h1_surface_gradient(const SurfaceMesh& mesh, const VertexField& rhs,
                                double h1_scale) {
  return h1_surface_gradient(SurfaceOperatorCache::assemble(mesh), rhs, h1_scale);
}

double field_dot(const VertexField& a, const VertexField& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i].dot(b[i]);
  return sum;
}

double field_max_norm(const VertexField& a) {
  double best = 0.0;
  for (const Vec3& v : a) best = std::max(best, v.lpNorm<Eigen::Infinity>());
  return best;
}

}  // namespace dtv
