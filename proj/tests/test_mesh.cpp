#include "dtv/mesh.hpp"

#include "dtv/functionals.hpp"
#include "dtv/s2.hpp"
#include "dtv/shapes.hpp"
#include "test_utils.hpp"

#include <doctest.h>

#include <cstdio>
#include <map>
#include <random>
#include <set>

using namespace dtv;

TEST_CASE("crossed cube counts satisfy the Euler formula") {
  const SurfaceMesh cube = shapes::cube_crossed_diagonals();
  CHECK(cube.n_vertices() == 14);
  CHECK(cube.n_triangles() == 24);
  CHECK(cube.n_edges() == 36);
  CHECK(cube.n_vertices() - cube.n_edges() + cube.n_triangles() == 2);
}

TEST_CASE("tetrahedron counts") {
  const SurfaceMesh tet = shapes::regular_tetrahedron(1.0);
  CHECK(tet.n_vertices() == 4);
  CHECK(tet.n_edges() == 6);
  CHECK(tet.n_triangles() == 4);
  CHECK(surface_area(tet).value == doctest::Approx(1.0));
}

TEST_CASE("icosphere counts and radius") {
  for (int level = 0; level <= 3; ++level) {
    const SurfaceMesh sphere = shapes::icosphere(level, 2.0);
    CHECK(sphere.n_triangles() == 20 * (1 << (2 * level)));
    for (const Vec3& x : sphere.vertices) CHECK(x.norm() == doctest::Approx(2.0));
    CHECK(sphere.n_vertices() - sphere.n_edges() + sphere.n_triangles() == 2);
  }
}

TEST_CASE("finalize rejects open and inconsistent meshes") {
  SurfaceMesh open_mesh;
  open_mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  open_mesh.triangles = {{0, 1, 2}};
  CHECK_THROWS_AS(open_mesh.finalize(), MeshError);

  SurfaceMesh flipped = shapes::regular_tetrahedron(1.0);
  std::swap(flipped.triangles[0][0], flipped.triangles[0][1]);
  flipped.edges.clear();
  CHECK_THROWS_AS(flipped.finalize(), MeshError);

  SurfaceMesh nonmanifold = shapes::regular_tetrahedron(1.0);
  nonmanifold.vertices.push_back(Vec3(2, 2, 2));
  nonmanifold.triangles.push_back({nonmanifold.triangles[0][1], nonmanifold.triangles[0][0], 4});
  nonmanifold.edges.clear();
  CHECK_THROWS_AS(nonmanifold.finalize(), MeshError);

  SurfaceMesh degenerate = shapes::regular_tetrahedron(1.0);
  std::vector<Vec3> squashed(degenerate.vertices.size());
  for (std::size_t v = 0; v < squashed.size(); ++v) {
    squashed[v] = Vec3(static_cast<double>(v), 0, 0);  // collinear -> zero areas
  }
  CHECK_THROWS_AS((void)degenerate.with_vertices(squashed), MeshError);
}

TEST_CASE("edge orientation convention") {
  std::mt19937_64 rng(3);
  const SurfaceMesh mesh = dtv::testing::random_bumpy_mesh(rng);
  for (const OrientedEdge& e : mesh.edges) {
    CHECK(e.a < e.b);
    CHECK(e.facet_plus >= 0);
    CHECK(e.facet_minus >= 0);
    CHECK(e.facet_plus != e.facet_minus);
    // (a, b) appears in ascending order inside F+ and descending inside F-.
    bool ascending_in_plus = false, descending_in_minus = false;
    const auto& tp = mesh.triangles[e.facet_plus];
    const auto& tm = mesh.triangles[e.facet_minus];
    for (int k = 0; k < 3; ++k) {
      if (tp[k] == e.a && tp[(k + 1) % 3] == e.b) ascending_in_plus = true;
      if (tm[k] == e.b && tm[(k + 1) % 3] == e.a) descending_in_minus = true;
    }
    CHECK(ascending_in_plus);
    CHECK(descending_in_minus);
  }
}

TEST_CASE("edge geometry on the crossed cube") {
  const SurfaceMesh cube = shapes::cube_crossed_diagonals();
  const auto geometry = compute_edge_geometry(cube);
  int right_angles = 0, flat = 0;
  for (const EdgeGeometry& g : geometry) {
    if (std::abs(g.theta - M_PI / 2) < 1e-12) {
      ++right_angles;
      CHECK(g.length == doctest::Approx(1.0));
    } else {
      CHECK(g.theta < 1e-7);
      CHECK(g.length == doctest::Approx(std::sqrt(0.5)));
      ++flat;
    }
  }
  CHECK(right_angles == 12);  // the cube edges
  CHECK(flat == 24);          // corner-to-face-center diagonals
}

TEST_CASE("co-normals are unit, in-plane, and point out of their facet") {
  std::mt19937_64 rng(5);
  const SurfaceMesh mesh = dtv::testing::random_bumpy_mesh(rng, 3);
  const auto geometry = compute_edge_geometry(mesh);
  REQUIRE(mesh.n_edges() >= 1000);
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const OrientedEdge& e = mesh.edges[i];
    const EdgeGeometry& g = geometry[i];
    const Vec3 t = (mesh.vertices[e.b] - mesh.vertices[e.a]).normalized();

    CHECK(g.n_plus.norm() == doctest::Approx(1.0));
    CHECK((g.n_plus - mesh.facet_normal(e.facet_plus)).norm() < 1e-14);
    CHECK((g.n_minus - mesh.facet_normal(e.facet_minus)).norm() < 1e-14);
    CHECK(g.theta == doctest::Approx(std::acos(s2::clamp_unit(g.n_plus.dot(g.n_minus)))));
    CHECK(g.length == doctest::Approx((mesh.vertices[e.b] - mesh.vertices[e.a]).norm()));

    for (int side = 0; side < 2; ++side) {
      const Vec3& mu = side == 0 ? g.mu_plus : g.mu_minus;
      const Vec3& n = side == 0 ? g.n_plus : g.n_minus;
      const auto& tri = mesh.triangles[side == 0 ? e.facet_plus : e.facet_minus];
      CHECK(mu.norm() == doctest::Approx(1.0));
      CHECK(std::abs(mu.dot(n)) < 1e-12);   // in the facet plane
      CHECK(std::abs(mu.dot(t)) < 1e-12);   // orthogonal to the edge
      int c = -1;
      for (int v : tri) {
        if (v != e.a && v != e.b) c = v;
      }
      const Vec3 mid = 0.5 * (mesh.vertices[e.a] + mesh.vertices[e.b]);
      CHECK(mu.dot(mesh.vertices[c] - mid) < 0.0);  // outward of the facet
    }
  }
}

TEST_CASE("vertex normals of a sphere are radial") {
  const SurfaceMesh sphere = shapes::icosphere(3, 1.0);
  const VertexField normals = vertex_normals(sphere);
  for (int i = 0; i < sphere.n_vertices(); ++i) {
    CHECK(normals[i].norm() == doctest::Approx(1.0));
    CHECK(normals[i].dot(sphere.vertices[i]) > 0.999);
  }
}

TEST_CASE("vertex noise is deterministic with the advertised deviation") {
  const SurfaceMesh sphere = shapes::icosphere(5, 1.0);
  REQUIRE(sphere.n_vertices() >= 10000);
  const double sigma_rel = 0.3;
  const SurfaceMesh noisy_a = add_vertex_noise(sphere, sigma_rel, 42);
  const SurfaceMesh noisy_b = add_vertex_noise(sphere, sigma_rel, 42);
  const SurfaceMesh noisy_c = add_vertex_noise(sphere, sigma_rel, 43);
  CHECK(dtv::testing::vertex_rmse(noisy_a.vertices, noisy_b.vertices) == 0.0);
  CHECK(dtv::testing::vertex_rmse(noisy_a.vertices, noisy_c.vertices) > 0.0);

  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < sphere.n_vertices(); ++i) {
    const double disp = (noisy_a.vertices[i] - sphere.vertices[i]).norm() *
                        ((noisy_a.vertices[i] - sphere.vertices[i]).dot(sphere.vertices[i]) < 0
                             ? -1.0
                             : 1.0);
    sum += disp;
    sum2 += disp * disp;
  }
  const double n = sphere.n_vertices();
  const double mean = sum / n;
  const double std_dev = std::sqrt(sum2 / n - mean * mean);
  const double sigma = sigma_rel * sphere.average_edge_length();
  CHECK(std::abs(mean) < 0.05 * sigma);
  CHECK(std::abs(std_dev - sigma) < 0.05 * sigma);
}

TEST_CASE("OFF round trip preserves geometry and connectivity") {
  std::mt19937_64 rng(9);
  const SurfaceMesh mesh = dtv::testing::random_bumpy_mesh(rng, 1);
  const std::string path = "roundtrip_test.off";
  write_off(mesh, path);
  const SurfaceMesh back = read_off(path);
  std::remove(path.c_str());
  REQUIRE(back.n_vertices() == mesh.n_vertices());
  REQUIRE(back.n_triangles() == mesh.n_triangles());
  CHECK(back.triangles == mesh.triangles);
  CHECK(dtv::testing::vertex_rmse(back.vertices, mesh.vertices) < 1e-15);
}

TEST_CASE("MSH round trip preserves the volume mesh and tags") {
  const TetMesh mesh = shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 3, 3);
  const std::string path = "roundtrip_test.msh";
  write_msh2(mesh, path);
  const TetMesh back = read_msh2(path);
  std::remove(path.c_str());
  REQUIRE(back.n_vertices() == mesh.n_vertices());
  CHECK(back.tets == mesh.tets);
  CHECK(back.boundary_triangles == mesh.boundary_triangles);
  CHECK(back.boundary_tags == mesh.boundary_tags);
  CHECK(dtv::testing::vertex_rmse(back.vertices, mesh.vertices) < 1e-15);
  back.validate();
}

TEST_CASE("shell tet mesh is valid with positive volume") {
  const TetMesh mesh = shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 8, 6);
  mesh.validate();
  double volume = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double v = mesh.tet_volume(t);
    CHECK(v > 0.0);
    volume += v;
  }
  // shell between radius 0.5 and 1 spheres, polyhedral underestimate
  const double exact = 4.0 / 3.0 * M_PI * (1.0 - 0.125);
  CHECK(volume == doctest::Approx(exact).epsilon(0.03));
  CHECK(volume < exact);
}

TEST_CASE("icosphere shell tet mesh is valid with no flat interface edges") {
  const TetMesh mesh = shapes::icosphere_shell_tet_mesh(0.5, 2, 4);
  mesh.validate();
  double volume = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double v = mesh.tet_volume(t);
    CHECK(v > 0.0);
    volume += v;
  }
  const double exact = 4.0 / 3.0 * M_PI * (1.0 - 0.125);
  CHECK(volume == doctest::Approx(exact).epsilon(0.05));
  CHECK(volume < exact);

  // all interface vertices sit on the radius-0.5 sphere and, lacking the quad
  // structure of the cube-sphere parameterization, every interface edge has a
  // genuinely nonzero dihedral angle
  const InterfaceMap interface = extract_interface(mesh);
  for (const Vec3& v : interface.surface.vertices) {
    CHECK(v.norm() == doctest::Approx(0.5).epsilon(1e-12));
  }
  for (const EdgeGeometry& g : compute_edge_geometry(interface.surface)) {
    CHECK(g.theta > 0.05);
  }
}

TEST_CASE("interface extraction yields a closed surface oriented into the inclusion") {
  const TetMesh volume = shapes::shell_tet_mesh(shapes::InnerBoundary::Cube, 0.4, 4, 4);
  const InterfaceMap interface = extract_interface(volume);
  const SurfaceMesh& gamma = interface.surface;

  CHECK(gamma.n_vertices() - gamma.n_edges() + gamma.n_triangles() == 2);
  REQUIRE(interface.surface_to_volume.size() == gamma.vertices.size());
  std::set<int> volume_ids;
  for (std::size_t i = 0; i < gamma.vertices.size(); ++i) {
    const int vi = interface.surface_to_volume[i];
    CHECK((gamma.vertices[i] - volume.vertices[vi]).norm() == 0.0);
    CHECK(gamma.vertices[i].lpNorm<Eigen::Infinity>() == doctest::Approx(0.4));
    volume_ids.insert(vi);
  }
  CHECK(volume_ids.size() == gamma.vertices.size());

  // normals point out of the shell volume, i.e. toward the origin
  for (int t = 0; t < gamma.n_triangles(); ++t) {
    const auto& tri = gamma.triangles[t];
    const Vec3 centroid =
        (gamma.vertices[tri[0]] + gamma.vertices[tri[1]] + gamma.vertices[tri[2]]) / 3.0;
    CHECK(gamma.facet_normal(t).dot(centroid) < 0.0);
  }
}

TEST_CASE("rigid motions leave edge geometry invariant") {
  std::mt19937_64 rng(13);
  const SurfaceMesh mesh = dtv::testing::random_bumpy_mesh(rng, 1);
  const Eigen::Matrix3d rot = dtv::testing::random_rotation(rng);
  const Vec3 shift(0.3, -1.2, 2.5);
  std::vector<Vec3> moved = mesh.vertices;
  for (Vec3& x : moved) x = rot * x + shift;
  const SurfaceMesh moved_mesh = mesh.with_vertices(moved);

  const auto g0 = compute_edge_geometry(mesh);
  const auto g1 = compute_edge_geometry(moved_mesh);
  for (std::size_t i = 0; i < g0.size(); ++i) {
    CHECK(g1[i].length == doctest::Approx(g0[i].length));
    CHECK(g1[i].theta == doctest::Approx(g0[i].theta).epsilon(1e-9));
    CHECK((g1[i].n_plus - rot * g0[i].n_plus).norm() < 1e-12);
    CHECK((g1[i].mu_minus - rot * g0[i].mu_minus).norm() < 1e-12);
  }
}
