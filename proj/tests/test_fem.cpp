#include "dtv/fem.hpp"

#include "dtv/functionals.hpp"
#include "dtv/shapes.hpp"
#include "test_utils.hpp"

#include <doctest.h>

#include <random>

using namespace dtv;

namespace {

double total_volume(const TetMesh& mesh) {
  double volume = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) volume += mesh.tet_volume(t);
  return volume;
}

double boundary_area(const TetMesh& mesh, int tag) {
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    if (mesh.boundary_tags[t] != tag) continue;
    const auto& tri = mesh.boundary_triangles[t];
    area += 0.5 * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                      .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]])
                      .norm();
  }
  return area;
}

Eigen::VectorXd nodal(const TetMesh& mesh, const Vec3& slope, double offset) {
  Eigen::VectorXd u(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) u[v] = slope.dot(mesh.vertices[v]) + offset;
  return u;
}

TetMesh small_shell() { return shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 3, 3); }

}  // namespace

TEST_CASE("stiffness reproduces the Dirichlet energy of linear fields") {
  const TetMesh mesh = small_shell();
  const Eigen::SparseMatrix<double> K = assemble_volume_stiffness(mesh);

  CHECK((K * Eigen::VectorXd::Ones(mesh.n_vertices())).lpNorm<Eigen::Infinity>() < 1e-12);

  std::mt19937_64 rng(301);
  std::normal_distribution<double> gauss;
  const double volume = total_volume(mesh);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 slope(gauss(rng), gauss(rng), gauss(rng));
    const Eigen::VectorXd u = nodal(mesh, slope, gauss(rng));
    // P1 exactness: u^T K u = |grad u|^2 * volume for linear u
    CHECK(u.dot(K * u) == doctest::Approx(slope.squaredNorm() * volume).epsilon(1e-10));
  }
}

TEST_CASE("boundary mass integrates over the tagged boundary only") {
  const TetMesh mesh = small_shell();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.n_vertices());
  const Eigen::SparseMatrix<double> outer = assemble_boundary_mass(mesh, 2);
  const Eigen::SparseMatrix<double> inner = assemble_boundary_mass(mesh, 1);
  CHECK(ones.dot(outer * ones) == doctest::Approx(boundary_area(mesh, 2)).epsilon(1e-12));
  CHECK(ones.dot(inner * ones) == doctest::Approx(boundary_area(mesh, 1)).epsilon(1e-12));
  // supports are disjoint vertex sets
  CHECK(ones.dot(outer * (inner * ones)) == doctest::Approx(0.0));
}

TEST_CASE("source patches partition the measurement boundary") {
  const TetMesh mesh = shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 6, 4);
  const int r = 12;
  const std::vector<int> patches = source_patches(mesh, r);
  REQUIRE(patches.size() == mesh.boundary_triangles.size());
  std::vector<int> counts(r, 0);
  for (std::size_t t = 0; t < patches.size(); ++t) {
    if (mesh.boundary_tags[t] == 2) {
      REQUIRE(patches[t] >= 0);
      REQUIRE(patches[t] < r);
      ++counts[patches[t]];
    } else {
      CHECK(patches[t] == -1);
    }
  }
  for (int count : counts) CHECK(count > 0);

  // loads are the patch indicators tested against the boundary mass
  const std::vector<Eigen::VectorXd> loads = make_source_loads(mesh, r);
  REQUIRE(static_cast<int>(loads.size()) == r);
  double load_sum = 0.0;
  for (const Eigen::VectorXd& f : loads) load_sum += f.sum();
  CHECK(load_sum == doctest::Approx(boundary_area(mesh, 2)).epsilon(1e-12));

  CHECK_THROWS(source_patches(mesh, 100000));  // far beyond the facet count
  CHECK_THROWS_AS((void)source_patches(mesh, 0), std::invalid_argument);
}

TEST_CASE("constant Robin data is solved exactly by a constant potential") {
  const TetMesh mesh = small_shell();
  const double alpha = 1e-3;
  FemSystem system = assemble(mesh, alpha);
  // f = alpha * c on all of Gamma_2 forces u = c
  const double c = 2.5;
  system.sources = {alpha * c * (system.robin_mass * Eigen::VectorXd::Ones(mesh.n_vertices()))};
  system.data = {Eigen::VectorXd::Zero(mesh.n_vertices())};

  for (LinearSolver solver : {LinearSolver::Ldlt, LinearSolver::JacobiCg}) {
    system.solver = solver;
    const std::vector<Eigen::VectorXd> states = solve_state(system);
    REQUIRE(states.size() == 1);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      CHECK(states[0][v] == doctest::Approx(c).epsilon(1e-7));
    }
  }
}

TEST_CASE("both solvers agree on the physical sources") {
  const TetMesh mesh = small_shell();
  FemSystem system = assemble(mesh, 1e-2);
  system.sources = make_source_loads(mesh, 4);
  system.data.assign(4, Eigen::VectorXd::Zero(mesh.n_vertices()));

  system.solver = LinearSolver::Ldlt;
  const auto direct = solve_state(system);
  system.solver = LinearSolver::JacobiCg;
  const auto iterative = solve_state(system);
  for (int i = 0; i < 4; ++i) {
    CHECK((direct[i] - iterative[i]).lpNorm<Eigen::Infinity>() <
          1e-6 * direct[i].lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("adjoint solves carry the measurement mismatch") {
  const TetMesh mesh = small_shell();
  FemSystem system = assemble(mesh, 1e-2);
  system.solver = LinearSolver::Ldlt;
  system.sources = make_source_loads(mesh, 4);
  system.data = synthesize_data(mesh, mesh, 4, 1e-2, 0.0, 1);
  // self-synthesized data reproduces the states, so the loss vanishes and the
  // adjoints are zero
  const auto states = solve_state(system);
  CHECK(loss_value(system, states) < 1e-18);
  const auto adjoints = solve_adjoint(system, states);
  for (const Eigen::VectorXd& p : adjoints) {
    CHECK(p.lpNorm<Eigen::Infinity>() < 1e-8);
  }

  // a constant data shift lies in the removed mean mode and leaves the
  // adjoint at zero
  FemSystem shifted = system;
  for (Eigen::VectorXd& z : shifted.data) z.array() += 0.01;
  for (const Eigen::VectorXd& p : solve_adjoint(shifted, states)) {
    CHECK(p.lpNorm<Eigen::Infinity>() < 1e-8);
  }

  // with non-constant perturbed data the adjoint satisfies op p = -M P(u - z),
  // P removing the lumped Gamma_2 mean of the mismatch
  for (Eigen::VectorXd& z : system.data) {
    for (int v = 0; v < mesh.n_vertices(); ++v) z[v] += 0.01 * mesh.vertices[v].z();
  }
  const auto p = solve_adjoint(system, states);
  const Eigen::VectorXd lump =
      system.robin_mass * Eigen::VectorXd::Ones(mesh.n_vertices());
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd diff = states[i] - system.data[i];
    diff.array() -= lump.dot(diff) / lump.sum();
    const Eigen::VectorXd residual = system.op * p[i] + system.robin_mass * diff;
    CHECK(residual.lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("shape derivative matches finite differences of the loss") {
  const TetMesh mesh = small_shell();
  const double alpha = 1e-2;
  const int r = 4;

  // reference data from a slightly different interior shape
  const TetMesh truth = shapes::shell_tet_mesh(shapes::InnerBoundary::Cube, 0.45, 3, 3);
  const std::vector<Eigen::VectorXd> data = synthesize_data(truth, mesh, r, alpha, 0.0, 1);

  auto loss_at = [&](const TetMesh& m) {
    FemSystem system = assemble(m, alpha);
    system.solver = LinearSolver::Ldlt;
    system.sources = make_source_loads(m, r);
    system.data = data;
    return loss_value(system, solve_state(system));
  };

  FemSystem system = assemble(mesh, alpha);
  system.solver = LinearSolver::Ldlt;
  system.sources = make_source_loads(mesh, r);
  system.data = data;
  const auto states = solve_state(system);
  const auto adjoints = solve_adjoint(system, states);
  const VertexField grad = loss_shape_derivative(mesh, states, adjoints);

  // perturb interior and Gamma_1 vertices only; on Gamma_2 the loads, the
  // Robin mass and the data would move as well
  std::vector<bool> on_outer(mesh.vertices.size(), false);
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    if (mesh.boundary_tags[t] != 2) continue;
    for (int v : mesh.boundary_triangles[t]) on_outer[v] = true;
  }
  std::mt19937_64 rng(307);
  std::normal_distribution<double> gauss;
  VertexField direction(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t v = 0; v < direction.size(); ++v) {
    if (!on_outer[v]) direction[v] = Vec3(gauss(rng), gauss(rng), gauss(rng));
  }

  const double h = 1e-6;
  TetMesh plus = mesh, minus = mesh;
  for (std::size_t v = 0; v < direction.size(); ++v) {
    plus.vertices[v] += h * direction[v];
    minus.vertices[v] -= h * direction[v];
  }
  const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
  double directional = 0.0;
  for (std::size_t v = 0; v < direction.size(); ++v) directional += grad[v].dot(direction[v]);
  CHECK(directional == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("volume extension interpolates the boundary data and stays bounded") {
  const TetMesh mesh = small_shell();
  const InterfaceMap interface = extract_interface(mesh);

  std::mt19937_64 rng(311);
  std::normal_distribution<double> gauss;
  VertexField displacement(interface.surface_to_volume.size());
  for (Vec3& v : displacement) v = 0.05 * Vec3(gauss(rng), gauss(rng), gauss(rng));

  const VertexField extended = volume_extension(mesh, interface, displacement);

  std::vector<int> constrained(mesh.n_vertices(), 0);
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    for (int v : mesh.boundary_triangles[t]) constrained[v] = mesh.boundary_tags[t];
  }
  double boundary_max = 0.0;
  for (std::size_t s = 0; s < displacement.size(); ++s) {
    CHECK((extended[interface.surface_to_volume[s]] - displacement[s]).norm() == 0.0);
    boundary_max = std::max(boundary_max, displacement[s].lpNorm<Eigen::Infinity>());
  }
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    if (constrained[v] == 2) CHECK(extended[v].norm() == 0.0);
    // discrete maximum principle, up to the non-acute elements of the shell
    CHECK(extended[v].lpNorm<Eigen::Infinity>() <= 1.1 * boundary_max);
  }
}

TEST_CASE("tet quality measure") {
  TetMesh regular;
  regular.vertices = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  regular.tets = {{0, 2, 1, 3}};  // positively oriented
  regular.boundary_triangles = {{1, 3, 2}, {0, 2, 3}, {0, 3, 1}, {0, 1, 2}};
  regular.boundary_tags = {2, 2, 2, 2};
  CHECK(min_tet_quality(regular) == doctest::Approx(1.0));

  TetMesh sliver = regular;
  sliver.vertices[0] = Vec3(-0.9, -0.9, 0.9);  // nearly collapsed onto vertex 3
  CHECK(min_tet_quality(sliver) < 0.2);

  const TetMesh shell = small_shell();
  const double q = min_tet_quality(shell);
  CHECK(q > 0.1);
  CHECK(q <= 1.0);
}

TEST_CASE("synthesized data is deterministic and noise scales with sigma") {
  const TetMesh truth = shapes::shell_tet_mesh(shapes::InnerBoundary::Cube, 0.4, 4, 3);
  const TetMesh target = small_shell();
  const int r = 4;

  const auto clean = synthesize_data(truth, target, r, 1e-2, 0.0, 9);
  const auto noisy_a = synthesize_data(truth, target, r, 1e-2, 1e-3, 9);
  const auto noisy_b = synthesize_data(truth, target, r, 1e-2, 1e-3, 9);
  const auto noisy_c = synthesize_data(truth, target, r, 1e-2, 1e-3, 10);

  double max_noise = 0.0;
  for (int i = 0; i < r; ++i) {
    CHECK((noisy_a[i] - noisy_b[i]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((noisy_a[i] - noisy_c[i]).lpNorm<Eigen::Infinity>() > 0.0);
    max_noise = std::max(max_noise, (noisy_a[i] - clean[i]).lpNorm<Eigen::Infinity>());
  }
  CHECK(max_noise > 1e-5);
  CHECK(max_noise < 1e-2);

  CHECK(mean_data_range(target, clean) > 0.0);
}

TEST_CASE("difference calibration cancels the discretization bias") {
  const TetMesh fine_sphere = shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 5, 5);
  const TetMesh target = small_shell();
  const double alpha = 1e-2;
  const int r = 4;

  // data synthesized from a fine mesh of the *same* shape as the target:
  // after calibration the model must fit it essentially exactly
  const auto raw = synthesize_data(fine_sphere, target, r, alpha, 0.0, 3);
  const auto calibrated = calibrate_data(fine_sphere, target, raw, alpha);

  EitLoss raw_loss(target, alpha, raw);
  EitLoss cal_loss(target, alpha, calibrated);
  const SurfaceMesh gamma = cal_loss.interface().surface;
  const double before = raw_loss.evaluate(gamma);
  const double after = cal_loss.evaluate(gamma);
  CHECK(before > 0.0);
  CHECK(after <= 1e-12 * before);
}

TEST_CASE("interior relaxation repairs a squeezed shell without touching boundaries") {
  const TetMesh mesh = small_shell();
  std::vector<char> boundary(mesh.n_vertices(), 0);
  for (const auto& tri : mesh.boundary_triangles) {
    for (int v : tri) boundary[v] = 1;
  }
  // crush the interior: pull every free vertex most of the way to the
  // inner boundary so the first layer nearly collapses
  TetMesh squeezed = mesh;
  for (int v = 0; v < squeezed.n_vertices(); ++v) {
    if (boundary[v]) continue;
    const Vec3 dir = squeezed.vertices[v].normalized();
    const double radius = squeezed.vertices[v].norm();
    squeezed.vertices[v] = dir * (0.52 + 0.05 * (radius - 0.5));
  }
  const double crushed = min_tet_quality(squeezed);
  REQUIRE(crushed < 0.05);

  const TetMesh relaxed = relax_interior(squeezed);
  CHECK(min_tet_quality(relaxed) > 5.0 * crushed);
  for (int v = 0; v < relaxed.n_vertices(); ++v) {
    if (boundary[v]) {
      CHECK((relaxed.vertices[v] - squeezed.vertices[v]).norm() == 0.0);
    }
  }
}

TEST_CASE("EIT loss evaluates, differentiates, and commits") {
  const TetMesh truth = shapes::shell_tet_mesh(shapes::InnerBoundary::Cube, 0.45, 3, 3);
  const TetMesh start = small_shell();
  const double alpha = 1e-2;
  const int r = 4;
  const std::vector<Eigen::VectorXd> data = synthesize_data(truth, start, r, alpha, 0.0, 1);

  EitLoss loss(start, alpha, data);
  const SurfaceMesh gamma = loss.interface().surface;
  const double value = loss.evaluate(gamma);
  CHECK(value > 0.0);  // wrong inclusion shape, nonzero mismatch

  // the reported gradient is the derivative of evaluate() through the full
  // surface-to-volume chain (extension transpose), so central differences
  // on surface perturbations must match it
  const VertexField grad = loss.gradient(gamma);
  REQUIRE(grad.size() == gamma.vertices.size());
  double norm = 0.0;
  for (const Vec3& g : grad) norm += g.squaredNorm();
  CHECK(norm > 0.0);

  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 3; ++trial) {
    VertexField dir(gamma.vertices.size());
    for (Vec3& d : dir) d = Vec3(gauss(rng), gauss(rng), gauss(rng));
    const double h = 1e-6;
    std::vector<Vec3> plus = gamma.vertices, minus = gamma.vertices;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      plus[i] += h * dir[i];
      minus[i] -= h * dir[i];
    }
    const double fd = (loss.evaluate(gamma.with_vertices(plus)) -
                       loss.evaluate(gamma.with_vertices(minus))) /
                      (2.0 * h);
    double directional = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) directional += grad[i].dot(dir[i]);
    CHECK(std::abs(directional - fd) <= 1e-4 * std::max(std::abs(fd), 1e-8));
  }

  // moving the interface outward toward the larger true inclusion must be
  // able to reduce the loss along the negative gradient
  double best = value;
  for (double t : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
    std::vector<Vec3> moved = gamma.vertices;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] -= t * grad[i];
    try {
      best = std::min(best, loss.evaluate(gamma.with_vertices(moved)));
    } catch (const MeshCorruptionError&) {
      break;
    }
  }
  CHECK(best < value);

  // commit moves the stored volume mesh along with the surface
  std::vector<Vec3> shifted = gamma.vertices;
  for (Vec3& x : shifted) x *= 1.02;
  const SurfaceMesh gamma2 = gamma.with_vertices(shifted);
  loss.commit(gamma2);
  for (std::size_t s = 0; s < loss.interface().surface.vertices.size(); ++s) {
    CHECK((loss.interface().surface.vertices[s] - gamma2.vertices[s]).norm() < 1e-12);
  }
  loss.volume_mesh().validate();

  // a collapse past the quality floor raises the corruption signal
  std::vector<Vec3> crushed = gamma2.vertices;
  for (Vec3& x : crushed) x *= 0.01;
  CHECK_THROWS_AS((void)loss.evaluate(gamma2.with_vertices(crushed)), MeshCorruptionError);
}
