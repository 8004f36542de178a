#pragma once

#include "dtv/mesh.hpp"

namespace dtv::shapes {

/// Unit cube with each face split by both diagonals into 4 triangles around a
/// face-center vertex (14 vertices, 24 triangles).
SurfaceMesh cube_crossed_diagonals();

/// Regular tetrahedron scaled to the given surface area.
SurfaceMesh regular_tetrahedron(double area);

/// Regular icosahedron scaled to the given surface area.
SurfaceMesh icosahedron(double area);

/// Icosahedron subdivided `subdivisions` times, vertices projected onto the
/// sphere of the given radius (20 * 4^subdivisions triangles).
SurfaceMesh icosphere(int subdivisions, double radius);

/// Axis-aligned box surface with an (nx, ny, nz) grid per face pair.
SurfaceMesh box(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz);

/// Radial projection of all vertices onto the sphere of the given radius,
/// keeping connectivity.
SurfaceMesh project_to_sphere(const SurfaceMesh& mesh, double radius);

enum class InnerBoundary {
  Cube,    // boundary of [-s, s]^3
  Sphere,  // boundary of B_s(0)
};

/// Tetrahedral shell between an inner boundary (tagged 1) and the unit sphere
/// (tagged 2), built from a cube-sphere parameterization with `n` cells per
/// cube-face edge and `layers` radial layers of prisms, each split into 3
/// tets with globally consistent diagonals.
TetMesh shell_tet_mesh(InnerBoundary kind, double inner_size, int n, int layers);

/// Tetrahedral shell between an inner sphere of radius `inner_radius`
/// (tagged 1) and the unit sphere (tagged 2), built by radially extruding an
/// icosphere with the given number of subdivisions through `layers` prism
/// layers. Unlike the cube-sphere shells this surface carries no quad
/// structure, so no inner-boundary edge is spuriously flat.
TetMesh icosphere_shell_tet_mesh(double inner_radius, int subdivisions, int layers);

}  // namespace dtv::shapes
