#pragma once

#include "dtv/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>

namespace dtv {

using Mat3 = Eigen::Matrix3d;

/// Derivative of the unit facet normal with respect to each of the three
/// vertex positions; every row of each matrix is orthogonal to the normal.
std::array<Mat3, 3> normal_jacobian(const Vec3& x0, const Vec3& x1, const Vec3& x2);

/// Derivatives of log_n(m) with respect to n and m (ambient 3x3 matrices).
struct LogDifferential {
  Mat3 wrt_n;
  Mat3 wrt_m;
};
LogDifferential log_map_differential(const Vec3& n, const Vec3& m);

/// Exact gradient with respect to vertex coordinates of the splitting term
///   m(Gamma) = beta sum |d_E| |E|
///            + (lambda/2) sum |E| | d_E - log_{n+}(n-) - b_E |^2,
/// with d and b treated as constants.
VertexField penalty_gradient(const SurfaceMesh& mesh, const std::vector<Vec3>& d,
                             const std::vector<Vec3>& b, double beta, double lambda);

/// P1 surface mass and Laplace-Beltrami stiffness on a triangle mesh, one
/// scalar block applied per coordinate component.
struct SurfaceOperatorCache {
  Eigen::SparseMatrix<double> mass;
  Eigen::SparseMatrix<double> stiffness;

  static SurfaceOperatorCache assemble(const SurfaceMesh& mesh);
};

/// Riesz step: solves (h1_scale * stiffness + mass) W = rhs component-wise
/// via conjugate gradients (rel. residual 1e-10), returning the smoothed
/// surface field.
VertexField h1_surface_gradient(const SurfaceOperatorCache& ops, const VertexField& rhs,
                                double h1_scale = 1e-4);
VertexField h1_surface_gradient(const SurfaceMesh& mesh, const VertexField& rhs,
                                double h1_scale = 1e-4);

// small helpers shared by the descent drivers
double field_dot(const VertexField& a, const VertexField& b);
double field_max_norm(const VertexField& a);

}  // namespace dtv
