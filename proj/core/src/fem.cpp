#include "dtv/fem.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace dtv {

namespace {

using Mat3d = Eigen::Matrix3d;

// Edge matrix B = [x1-x0, x2-x0, x3-x0].
Mat3d edge_matrix(const TetMesh& mesh, const std::array<int, 4>& tet) {
  Mat3d B;
  for (int c = 0; c < 3; ++c) B.col(c) = mesh.vertices[tet[c + 1]] - mesh.vertices[tet[0]];
  return B;
}

std::vector<Eigen::VectorXd> solve_many(const FemSystem& system,
                                        const std::vector<Eigen::VectorXd>& rhs) {
  std::vector<Eigen::VectorXd> solutions;
  solutions.reserve(rhs.size());
  if (system.solver == LinearSolver::Ldlt) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system.op);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("fem: LDLT factorization failed");
    for (const Eigen::VectorXd& f : rhs) solutions.push_back(ldlt.solve(f));
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(50 * system.op.rows());
    cg.compute(system.op);
    for (const Eigen::VectorXd& f : rhs) {
      solutions.push_back(cg.solve(f));
      if (cg.info() != Eigen::Success) throw std::runtime_error("fem: CG stagnation");
    }
  }
  return solutions;
}

}  // namespace

Eigen::SparseMatrix<double> assemble_volume_stiffness(const TetMesh& mesh) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.tets.size() * 16);
  for (const auto& tet : mesh.tets) {
    const Mat3d B = edge_matrix(mesh, tet);
    const double det = B.determinant();
    if (det <= 0.0) throw MeshError("assemble: inverted tet");
    const double volume = det / 6.0;
    // gradients of the barycentric basis: columns of B^{-T} for phi_1..3,
    // phi_0 = -(sum of the others)
    const Mat3d Binv_t = B.inverse().transpose();
    Eigen::Matrix<double, 3, 4> grads;
    grads.col(0) = -(Binv_t.col(0) + Binv_t.col(1) + Binv_t.col(2));
    for (int c = 0; c < 3; ++c) grads.col(c + 1) = Binv_t.col(c);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        entries.emplace_back(tet[i], tet[j], volume * grads.col(i).dot(grads.col(j)));
      }
    }
  }
  Eigen::SparseMatrix<double> K(mesh.n_vertices(), mesh.n_vertices());
  K.setFromTriplets(entries.begin(), entries.end());
  return K;
}

Eigen::SparseMatrix<double> assemble_boundary_mass(const TetMesh& mesh, int tag) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    if (mesh.boundary_tags[t] != tag) continue;
    const auto& tri = mesh.boundary_triangles[t];
    const Vec3 u = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Vec3 v = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    const double area = 0.5 * u.cross(v).norm();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        entries.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  Eigen::SparseMatrix<double> M(mesh.n_vertices(), mesh.n_vertices());
  M.setFromTriplets(entries.begin(), entries.end());
  return M;
}

FemSystem assemble(const TetMesh& mesh, double alpha) {
  FemSystem system;
  system.alpha = alpha;
  system.stiffness = assemble_volume_stiffness(mesh);
  system.robin_mass = assemble_boundary_mass(mesh, 2);
  system.op = system.stiffness + alpha * system.robin_mass;
  return system;
}

std::vector<int> source_patches(const TetMesh& mesh, int r) {
  if (r < 1) throw std::invalid_argument("source_patches: r must be >= 1");
  // largest divisor of r not exceeding sqrt(r) gives the latitude band count
  int n_lat = 1;
  for (int k = 1; k * k <= r; ++k) {
    if (r % k == 0) n_lat = k;
  }
  const int n_lon = r / n_lat;

  std::vector<int> patches;
  std::vector<int> counts(r, 0);
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    if (mesh.boundary_tags[t] != 2) {
      patches.push_back(-1);
      continue;
    }
    const auto& tri = mesh.boundary_triangles[t];
    const Vec3 centroid =
        (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
    const Vec3 d = centroid.normalized();
    int lat = static_cast<int>((d.z() + 1.0) / 2.0 * n_lat);
    lat = std::min(std::max(lat, 0), n_lat - 1);
    const double lon_angle = std::atan2(d.y(), d.x());  // [-pi, pi]
    int lon = static_cast<int>((lon_angle + M_PI) / (2.0 * M_PI) * n_lon);
    lon = std::min(std::max(lon, 0), n_lon - 1);
    const int patch = lat * n_lon + lon;
    patches.push_back(patch);
    ++counts[patch];
  }
  for (int i = 0; i < r; ++i) {
    if (counts[i] == 0) {
      throw std::runtime_error("source_patches: empty patch #" + std::to_string(i) +
                               " (r too large for the mesh resolution)");
    }
  }
  return patches;
}

std::vector<Eigen::VectorXd> make_source_loads(const TetMesh& mesh, int r) {
  const std::vector<int> patches = source_patches(mesh, r);
  std::vector<Eigen::VectorXd> loads(r, Eigen::VectorXd::Zero(mesh.n_vertices()));
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    const int patch = patches[t];
    if (patch < 0) continue;
    const auto& tri = mesh.boundary_triangles[t];
    const Vec3 u = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Vec3 v = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    const double area = 0.5 * u.cross(v).norm();
    for (int k = 0; k < 3; ++k) loads[patch][tri[k]] += area / 3.0;
  }
  return loads;
}

std::vector<Eigen::VectorXd> solve_state(const FemSystem& system) {
  return solve_many(system, system.sources);
}

namespace {

// Boundary misfit with its Gamma_2 mean removed. The compatibility identity
// alpha * int_G2 u_i = int_G2 f_i pins the boundary mean of both u_i and z_i
// to the same value, so in exact arithmetic the subtraction changes nothing.
// Numerically the constant mode is the operator's softest direction (its
// eigenvalue scales with alpha), so it dominates the solver error by a factor
// ~1/alpha; projecting it out keeps the misfit evaluation smooth at the
// resolution the line search needs.
Eigen::VectorXd mean_free_misfit(const FemSystem& system, const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& data) {
  Eigen::VectorXd diff = state - data;
  const Eigen::VectorXd lump = system.robin_mass * Eigen::VectorXd::Ones(diff.size());
  const double area = lump.sum();
  diff.array() -= lump.dot(diff) / area;
  return diff;
}

}  // namespace

std::vector<Eigen::VectorXd> solve_adjoint(const FemSystem& system,
                                           const std::vector<Eigen::VectorXd>& states) {
  std::vector<Eigen::VectorXd> rhs;
  rhs.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    rhs.push_back(-(system.robin_mass * mean_free_misfit(system, states[i], system.data[i])));
  }
  return solve_many(system, rhs);
}

double loss_value(const FemSystem& system, const std::vector<Eigen::VectorXd>& states) {
  double value = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Eigen::VectorXd diff = mean_free_misfit(system, states[i], system.data[i]);
    value += 0.5 * diff.dot(system.robin_mass * diff);
  }
  return value;
}

VertexField loss_shape_derivative(const TetMesh& mesh,
                                  const std::vector<Eigen::VectorXd>& states,
                                  const std::vector<Eigen::VectorXd>& adjoints) {
  VertexField grad(mesh.vertices.size(), Vec3::Zero());
  for (const auto& tet : mesh.tets) {
    const Mat3d B = edge_matrix(mesh, tet);
    const double det = B.determinant();
    const Mat3d Binv = B.inverse();
    const Mat3d M = (B.transpose() * B).inverse();

    // C = sum_i ghat_u ghat_p^T with ghat the nodal differences
    Mat3d C = Mat3d::Zero();
    for (std::size_t i = 0; i < states.size(); ++i) {
      Vec3 gu, gp;
      for (int c = 0; c < 3; ++c) {
        gu[c] = states[i][tet[c + 1]] - states[i][tet[0]];
        gp[c] = adjoints[i][tet[c + 1]] - adjoints[i][tet[0]];
      }
      C += gu * gp.transpose();
    }
    // d/dB of det/6 * tr(M C) with M = (B^T B)^{-1}
    const Mat3d G = B * M * (C + C.transpose()) * M;
    const Mat3d H = (det / 6.0) * ((M * C).trace() * Binv.transpose() - G);
    for (int c = 0; c < 3; ++c) grad[tet[c + 1]] += H.col(c);
    grad[tet[0]] -= H.col(0) + H.col(1) + H.col(2);
  }
  return grad;
}

std::vector<Eigen::VectorXd> synthesize_data(const TetMesh& true_mesh, const TetMesh& target,
                                             int r, double alpha, double sigma,
                                             std::uint64_t seed) {
  FemSystem forward = assemble(true_mesh, alpha);
  forward.solver = LinearSolver::Ldlt;
  forward.sources = make_source_loads(true_mesh, r);
  const std::vector<Eigen::VectorXd> states = solve_state(forward);

  // Gamma_2 triangles of the true mesh, for ray interpolation from the origin.
  std::vector<std::array<int, 3>> outer_tris;
  for (std::size_t t = 0; t < true_mesh.boundary_triangles.size(); ++t) {
    if (true_mesh.boundary_tags[t] == 2) outer_tris.push_back(true_mesh.boundary_triangles[t]);
  }

  std::vector<bool> on_outer(target.vertices.size(), false);
  for (std::size_t t = 0; t < target.boundary_triangles.size(); ++t) {
    if (target.boundary_tags[t] != 2) continue;
    for (int v : target.boundary_triangles[t]) on_outer[v] = true;
  }

  std::vector<Eigen::VectorXd> data(r, Eigen::VectorXd::Zero(target.n_vertices()));
  for (int v = 0; v < target.n_vertices(); ++v) {
    if (!on_outer[v]) continue;
    const Vec3 dir = target.vertices[v].normalized();
    // find the Gamma_2 triangle of the true mesh hit by the ray t*dir
    double best_score = -1e30;
    Vec3 best_bary = Vec3::Zero();
    const std::array<int, 3>* best_tri = nullptr;
    for (const auto& tri : outer_tris) {
      const Vec3& a = true_mesh.vertices[tri[0]];
      Mat3d A;
      A.col(0) = true_mesh.vertices[tri[1]] - a;
      A.col(1) = true_mesh.vertices[tri[2]] - a;
      A.col(2) = -dir;
      const Vec3 sol = A.fullPivLu().solve(-a);  // (u, v, t)
      if (sol[2] <= 0.0) continue;
      const Vec3 bary(1.0 - sol[0] - sol[1], sol[0], sol[1]);
      const double score = bary.minCoeff();
      if (score > best_score) {
        best_score = score;
        best_bary = bary;
        best_tri = &tri;
      }
    }
    if (!best_tri || best_score < -1e-6) {
      throw std::runtime_error("synthesize_data: failed to interpolate a Gamma_2 vertex");
    }
    for (int i = 0; i < r; ++i) {
      double value = 0.0;
      for (int k = 0; k < 3; ++k) value += best_bary[k] * states[i][(*best_tri)[k]];
      data[i][v] = value;
    }
  }

  // Re-reference each measurement to the target discretization's ground level.
  // Testing the PDE with the constant 1 gives alpha * \int_G2 u = \int_G2 f_i
  // exactly, independent of the interface, so the boundary mean of any model
  // solution on the target mesh is fixed a priori. The interpolated data keep
  // the true mesh's mean instead; the difference is a per-experiment constant
  // carrying no shape information, yet it is amplified by 1/alpha and would
  // otherwise dominate the misfit. Shift it out once here.
  {
    const FemSystem target_system = assemble(target, alpha);
    const std::vector<Eigen::VectorXd> target_loads = make_source_loads(target, r);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(target.n_vertices());
    const Eigen::VectorXd boundary_lump = target_system.robin_mass * ones;
    const double gamma2_area = ones.dot(boundary_lump);
    for (int i = 0; i < r; ++i) {
      const double shift =
          (target_loads[i].sum() / alpha - boundary_lump.dot(data[i])) / gamma2_area;
      for (int v = 0; v < target.n_vertices(); ++v) {
        if (on_outer[v]) data[i][v] += shift;
      }
    }
  }

  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (int i = 0; i < r; ++i) {
      for (int v = 0; v < target.n_vertices(); ++v) {
        if (on_outer[v]) data[i][v] += gauss(rng);
      }
    }
  }
  return data;
}

std::vector<Eigen::VectorXd> calibrate_data(const TetMesh& reference_mesh, const TetMesh& target,
                                            std::vector<Eigen::VectorXd> data, double alpha) {
  const int r = static_cast<int>(data.size());
  const std::vector<Eigen::VectorXd> reference =
      synthesize_data(reference_mesh, target, r, alpha, 0.0, 0);
  FemSystem model = assemble(target, alpha);
  model.solver = LinearSolver::Ldlt;
  model.sources = make_source_loads(target, r);
  const std::vector<Eigen::VectorXd> states = solve_state(model);

  std::vector<bool> on_outer(target.vertices.size(), false);
  for (std::size_t t = 0; t < target.boundary_triangles.size(); ++t) {
    if (target.boundary_tags[t] != 2) continue;
    for (int v : target.boundary_triangles[t]) on_outer[v] = true;
  }
  for (int i = 0; i < r; ++i) {
    for (int v = 0; v < target.n_vertices(); ++v) {
      if (on_outer[v]) data[i][v] += states[i][v] - reference[i][v];
    }
  }
  return data;
}

double mean_data_range(const TetMesh& mesh, const std::vector<Eigen::VectorXd>& data) {
  std::vector<bool> on_outer(mesh.vertices.size(), false);
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    if (mesh.boundary_tags[t] != 2) continue;
    for (int v : mesh.boundary_triangles[t]) on_outer[v] = true;
  }
  double total = 0.0;
  for (const Eigen::VectorXd& z : data) {
    double lo = 1e300, hi = -1e300;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      if (!on_outer[v]) continue;
      lo = std::min(lo, z[v]);
      hi = std::max(hi, z[v]);
    }
    total += hi - lo;
  }
  return total / static_cast<double>(data.size());
}

VertexField volume_extension(const TetMesh& mesh, const InterfaceMap& interface,
                             const VertexField& surface_displacement) {
  if (surface_displacement.size() != interface.surface_to_volume.size()) {
    throw std::invalid_argument("volume_extension: surface field size mismatch");
  }
  const int n = mesh.n_vertices();

  // Dirichlet set: Gamma_1 takes the surface data, Gamma_2 is pinned to zero.
  std::vector<int> constrained(n, 0);  // 0 free, 1 Gamma_1, 2 Gamma_2
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    for (int v : mesh.boundary_triangles[t]) constrained[v] = mesh.boundary_tags[t];
  }
  VertexField out(n, Vec3::Zero());
  for (std::size_t s = 0; s < interface.surface_to_volume.size(); ++s) {
    out[interface.surface_to_volume[s]] = surface_displacement[s];
  }

  // consistent P1 tet mass
  std::vector<Eigen::Triplet<double>> mass_entries;
  for (const auto& tet : mesh.tets) {
    const double volume = mesh.tet_volume(std::addressof(tet) - mesh.tets.data());
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        mass_entries.emplace_back(tet[i], tet[j], volume / 20.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(mass_entries.begin(), mass_entries.end());
  const Eigen::SparseMatrix<double> A = assemble_volume_stiffness(mesh) + M;

  std::vector<int> free_index(n, -1);
  int n_free = 0;
  for (int v = 0; v < n; ++v) {
    if (constrained[v] == 0) free_index[v] = n_free++;
  }
  if (n_free == 0) return out;

  std::vector<Eigen::Triplet<double>> ff_entries;
  Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n_free, 3);
  for (int col = 0; col < A.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      if (free_index[i] < 0) continue;
      if (free_index[j] >= 0) {
        ff_entries.emplace_back(free_index[i], free_index[j], it.value());
      } else {
        rhs.row(free_index[i]) -= it.value() * out[j].transpose();
      }
    }
  }
  Eigen::SparseMatrix<double> A_ff(n_free, n_free);
  A_ff.setFromTriplets(ff_entries.begin(), ff_entries.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(10 * n_free);
  cg.compute(A_ff);
  for (int comp = 0; comp < 3; ++comp) {
    const Eigen::VectorXd w = cg.solve(rhs.col(comp));
    if (cg.info() != Eigen::Success) {
      throw std::runtime_error("volume_extension: CG did not converge");
    }
    for (int v = 0; v < n; ++v) {
      if (free_index[v] >= 0) out[v][comp] = w[free_index[v]];
    }
  }
  return out;
}

VertexField extension_pullback(const TetMesh& mesh, const InterfaceMap& interface,
                               const VertexField& volume_field) {
  if (volume_field.size() != static_cast<std::size_t>(mesh.n_vertices())) {
    throw std::invalid_argument("extension_pullback: volume field size mismatch");
  }
  const int n = mesh.n_vertices();

  std::vector<int> constrained(n, 0);
  for (std::size_t t = 0; t < mesh.boundary_triangles.size(); ++t) {
    for (int v : mesh.boundary_triangles[t]) constrained[v] = mesh.boundary_tags[t];
  }

  // same operator as volume_extension; the pullback is
  // g_b - A_bf A_ff^{-1} g_f restricted to the Gamma_1 rows
  std::vector<Eigen::Triplet<double>> mass_entries;
  for (const auto& tet : mesh.tets) {
    const double volume = mesh.tet_volume(std::addressof(tet) - mesh.tets.data());
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        mass_entries.emplace_back(tet[i], tet[j], volume / 20.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(mass_entries.begin(), mass_entries.end());
  const Eigen::SparseMatrix<double> A = assemble_volume_stiffness(mesh) + M;

  std::vector<int> free_index(n, -1);
  int n_free = 0;
  for (int v = 0; v < n; ++v) {
    if (constrained[v] == 0) free_index[v] = n_free++;
  }

  VertexField correction(n, Vec3::Zero());
  if (n_free > 0) {
    std::vector<Eigen::Triplet<double>> ff_entries;
    Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n_free, 3);
    for (int v = 0; v < n; ++v) {
      if (free_index[v] >= 0) rhs.row(free_index[v]) = volume_field[v].transpose();
    }
    for (int col = 0; col < A.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) {
        const int i = static_cast<int>(it.row());
        const int j = static_cast<int>(it.col());
        if (free_index[i] >= 0 && free_index[j] >= 0) {
          ff_entries.emplace_back(free_index[i], free_index[j], it.value());
        }
      }
    }
    Eigen::SparseMatrix<double> A_ff(n_free, n_free);
    A_ff.setFromTriplets(ff_entries.begin(), ff_entries.end());

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(10 * n_free);
    cg.compute(A_ff);
    Eigen::MatrixX3d y(n_free, 3);
    for (int comp = 0; comp < 3; ++comp) {
      y.col(comp) = cg.solve(rhs.col(comp));
      if (cg.info() != Eigen::Success) {
        throw std::runtime_error("extension_pullback: CG did not converge");
      }
    }
    // correction = A_bf y on the constrained rows
    for (int col = 0; col < A.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) {
        const int i = static_cast<int>(it.row());
        const int j = static_cast<int>(it.col());
        if (free_index[i] < 0 && free_index[j] >= 0) {
          correction[i] += it.value() * Vec3(y.row(free_index[j]).transpose());
        }
      }
    }
  }

  VertexField out(interface.surface_to_volume.size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    const int b = interface.surface_to_volume[s];
    out[s] = volume_field[b] - correction[b];
  }
  return out;
}

namespace {

double tet_radius_ratio(const TetMesh& mesh, int t) {
  const auto& tet = mesh.tets[t];
  const double volume = mesh.tet_volume(t);
  if (volume <= 0.0) return 0.0;
  double face_area = 0.0;
  static const int faces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (const auto& f : faces) {
    const Vec3 u = mesh.vertices[tet[f[1]]] - mesh.vertices[tet[f[0]]];
    const Vec3 v = mesh.vertices[tet[f[2]]] - mesh.vertices[tet[f[0]]];
    face_area += 0.5 * u.cross(v).norm();
  }
  const double inradius = 3.0 * volume / face_area;
  // circumcenter from |x - x_i|^2 = |x - x_0|^2
  const Vec3& x0 = mesh.vertices[tet[0]];
  Mat3d A;
  Vec3 b;
  for (int c = 0; c < 3; ++c) {
    const Vec3 e = mesh.vertices[tet[c + 1]] - x0;
    A.row(c) = 2.0 * e.transpose();
    b[c] = e.squaredNorm();
  }
  const Vec3 center_offset = A.fullPivLu().solve(b);
  const double circumradius = center_offset.norm();
  return 3.0 * inradius / circumradius;
}

}  // namespace

TetMesh relax_interior(const TetMesh& mesh, int passes, double omega) {
  std::vector<char> boundary(mesh.n_vertices(), 0);
  for (const auto& tri : mesh.boundary_triangles) {
    for (int v : tri) boundary[v] = 1;
  }
  std::vector<std::vector<int>> neighbors(mesh.n_vertices());
  for (const auto& tet : mesh.tets) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) neighbors[tet[i]].push_back(tet[j]);
      }
    }
  }
  for (auto& list : neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  std::vector<std::vector<int>> incident(mesh.n_vertices());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    for (int v : mesh.tets[t]) incident[v].push_back(t);
  }
  TetMesh out = mesh;
  auto local_quality = [&](int v) {
    double q = 1.0;
    for (int t : incident[v]) q = std::min(q, tet_radius_ratio(out, t));
    return q;
  };
  for (int p = 0; p < passes; ++p) {
    bool improved = false;
    for (int v = 0; v < out.n_vertices(); ++v) {
      if (boundary[v] || neighbors[v].empty()) continue;
      const double local = local_quality(v);
      if (local > 0.3) continue;  // only repair genuinely bad neighborhoods
      const Vec3 original = out.vertices[v];
      Vec3 centroid = Vec3::Zero();
      double edge = std::numeric_limits<double>::max();
      for (int w : neighbors[v]) {
        centroid += out.vertices[w];
        edge = std::min(edge, (out.vertices[w] - original).norm());
      }
      centroid /= static_cast<double>(neighbors[v].size());
      // greedy local search over the centroid blend and coordinate moves,
      // keeping the best strict improvement of the local worst radius ratio
      Vec3 best = original;
      double best_q = local;
      auto consider = [&](const Vec3& candidate) {
        out.vertices[v] = candidate;
        const double q = local_quality(v);
        if (q > best_q) {
          best_q = q;
          best = candidate;
        }
      };
      consider((1.0 - omega) * original + omega * centroid);
      for (double scale : {0.5, 0.2}) {
        for (int axis = 0; axis < 3; ++axis) {
          for (double sign : {1.0, -1.0}) {
            Vec3 candidate = original;
            candidate[axis] += sign * scale * edge;
            consider(candidate);
          }
        }
      }
      out.vertices[v] = best;
      improved = improved || best_q > local;
    }
    if (!improved) break;
  }
  return out;
}

double min_tet_quality(const TetMesh& mesh) {
  double worst = 1.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    worst = std::min(worst, tet_radius_ratio(mesh, t));
    if (worst == 0.0) break;
  }
  return worst;
}

EitLoss::EitLoss(TetMesh mesh, double alpha, std::vector<Eigen::VectorXd> data,
                 LinearSolver solver)
    : mesh_(std::move(mesh)),
      interface_(extract_interface(mesh_)),
      base_mesh_(mesh_),
      base_interface_(interface_),
      alpha_(alpha),
      data_(std::move(data)),
      solver_(solver) {}

TetMesh EitLoss::deform_to(const SurfaceMesh& gamma) const {
  // Always extend the total displacement from the pristine reference mesh.
  // Re-extending incrementally from the last committed mesh would bake every
  // substep's small-scale wiggles into the volume for good, and the
  // accumulated strain grinds the worst tet down to the abort floor long
  // before the interface reaches its target.
  VertexField displacement(base_interface_.surface_to_volume.size());
  double max_move = 0.0;
  for (std::size_t s = 0; s < displacement.size(); ++s) {
    displacement[s] =
        gamma.vertices[s] - base_mesh_.vertices[base_interface_.surface_to_volume[s]];
    max_move = std::max(max_move, displacement[s].norm());
  }
  if (max_move == 0.0) return base_mesh_;
  const VertexField volume_field = volume_extension(base_mesh_, base_interface_, displacement);
  TetMesh deformed = base_mesh_;
  for (int v = 0; v < deformed.n_vertices(); ++v) deformed.vertices[v] += volume_field[v];
  for (int t = 0; t < deformed.n_tets(); ++t) {
    if (deformed.tet_volume(t) <= 0.0) {
      throw MeshCorruptionError("EitLoss: inverted tet after interface deformation");
    }
  }
  if (min_tet_quality(deformed) < quality_floor) {
    throw MeshCorruptionError("EitLoss: tet quality dropped below the abort threshold");
  }
  return deformed;
}

const EitLoss::Evaluation& EitLoss::prepare(const SurfaceMesh& gamma) {
  if (cache_ && cache_->gamma_vertices == gamma.vertices) return *cache_;
  auto eval = std::make_unique<Evaluation>();
  eval->gamma_vertices = gamma.vertices;
  eval->mesh = deform_to(gamma);
  eval->system = assemble(eval->mesh, alpha_);
  eval->system.solver = solver_;
  eval->system.sources = make_source_loads(eval->mesh, static_cast<int>(data_.size()));
  eval->system.data = data_;
  eval->states = solve_state(eval->system);
  eval->loss = loss_value(eval->system, eval->states);
  cache_ = std::move(eval);
  return *cache_;
}

double EitLoss::evaluate(const SurfaceMesh& gamma) { return prepare(gamma).loss; }

VertexField EitLoss::gradient(const SurfaceMesh& gamma) {
  const Evaluation& eval = prepare(gamma);
  const std::vector<Eigen::VectorXd> adjoints = solve_adjoint(eval.system, eval.states);
  const VertexField volume_grad = loss_shape_derivative(eval.mesh, eval.states, adjoints);
  // chain rule through deform_to: interior vertices follow the extension of
  // the surface displacement, so the surface gradient is the extension
  // transpose of the volume derivative, not its plain restriction. deform_to
  // is affine in gamma with the extension assembled on the reference mesh,
  // so the pullback operator lives on the reference mesh as well.
  return extension_pullback(base_mesh_, base_interface_, volume_grad);
}

void EitLoss::commit(const SurfaceMesh& gamma) {
  const Evaluation& eval = prepare(gamma);
  mesh_ = eval.mesh;
  interface_ = extract_interface(mesh_);
  // Large interface excursions (e.g. the inclusion growing a corner) decay
  // quickly inside a harmonic extension, so the first interior layer takes
  // most of the strain. When the committed mesh nears the abort floor,
  // redistribute the interior vertices (boundaries stay put) and rebase the
  // extension on the relaxed configuration; connectivity never changes.
  if (min_tet_quality(mesh_) < 2.0 * quality_floor) {
    TetMesh relaxed = relax_interior(mesh_);
    if (min_tet_quality(relaxed) > min_tet_quality(mesh_)) mesh_ = std::move(relaxed);
    base_mesh_ = mesh_;
    base_interface_ = interface_;
    cache_.reset();
  }
}

}  // namespace dtv
