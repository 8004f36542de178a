#pragma once

#include "dtv/bregman.hpp"
#include "dtv/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <vector>

namespace dtv {

enum class LinearSolver {
  JacobiCg,  // Jacobi-preconditioned CG, rel. residual 1e-10
  Ldlt,      // sparse LDLT factorization, reused across the r right-hand sides
};

/// P1 tetrahedral system for the EIT model: Laplace stiffness plus a Robin
/// boundary mass on Gamma_2, with r piecewise-constant sources f_i and
/// measurement data z_i on Gamma_2.
struct FemSystem {
  Eigen::SparseMatrix<double> stiffness;   // volume Laplace part
  Eigen::SparseMatrix<double> robin_mass;  // Gamma_2 boundary mass
  Eigen::SparseMatrix<double> op;          // stiffness + alpha * robin_mass
  double alpha = 0.0;
  std::vector<Eigen::VectorXd> sources;  // assembled loads, one per experiment
  std::vector<Eigen::VectorXd> data;     // z_i on volume dofs, nonzero on Gamma_2
  LinearSolver solver = LinearSolver::JacobiCg;

  int r() const { return static_cast<int>(sources.size()); }
};

Eigen::SparseMatrix<double> assemble_volume_stiffness(const TetMesh& mesh);
Eigen::SparseMatrix<double> assemble_boundary_mass(const TetMesh& mesh, int tag);

/// Stiffness + alpha-scaled Gamma_2 boundary mass; sources and data are
/// attached separately.
FemSystem assemble(const TetMesh& mesh, double alpha);

/// Partitions Gamma_2 facets into r latitude x longitude patches of facet
/// centroids; returns the patch id per Gamma_2 facet (indexed in order of the
/// tagged boundary triangles). Throws when a patch comes out empty.
std::vector<int> source_patches(const TetMesh& mesh, int r);

/// Loads F_i = integral over Gamma_2 of f_i phi, with f_i the indicator of
/// patch i.
std::vector<Eigen::VectorXd> make_source_loads(const TetMesh& mesh, int r);

/// One solve per source with the shared operator.
std::vector<Eigen::VectorXd> solve_state(const FemSystem& system);

/// Same operator, Robin data -(u_i - z_i).
std::vector<Eigen::VectorXd> solve_adjoint(const FemSystem& system,
                                           const std::vector<Eigen::VectorXd>& states);

/// (1/2) sum_i integral over Gamma_2 of |u_i - z_i|^2.
double loss_value(const FemSystem& system, const std::vector<Eigen::VectorXd>& states);

/// Coordinate derivative of sum_i integral over Omega of grad p_i . grad u_i,
/// per volume vertex. Gamma_2 terms contribute nothing for perturbations
/// supported on Gamma_1.
VertexField loss_shape_derivative(const TetMesh& mesh,
                                  const std::vector<Eigen::VectorXd>& states,
                                  const std::vector<Eigen::VectorXd>& adjoints);

/// Solves forward problems on a reference "true" mesh and interpolates the
/// boundary potentials onto the Gamma_2 vertices of `target` (both Gamma_2
/// triangulate the same sphere), adding Gaussian noise of the given standard
/// deviation per degree of freedom.
std::vector<Eigen::VectorXd> synthesize_data(const TetMesh& true_mesh, const TetMesh& target,
                                             int r, double alpha, double sigma,
                                             std::uint64_t seed);

/// Difference calibration of synthetic measurements: replaces each z_i by
/// z_i - z_i^ref + u_i, where z_i^ref is synthesized from a reference mesh
/// carrying the initial interface shape and u_i is the model solution on the
/// target itself. The target's discretization bias cancels to first order,
/// which matters here because it can exceed the shape signal of a
/// volume-matched inclusion by a large factor.
std::vector<Eigen::VectorXd> calibrate_data(const TetMesh& reference_mesh, const TetMesh& target,
                                            std::vector<Eigen::VectorXd> data, double alpha);

/// Mean over experiments of (max z_i - min z_i) on Gamma_2.
double mean_data_range(const TetMesh& mesh, const std::vector<Eigen::VectorXd>& data);

/// Harmonic-type extension of a Gamma_1 surface displacement into the
/// volume: solves (grad W, grad V) + (W, V) = 0 with Dirichlet data W on
/// Gamma_1 and W = 0 on Gamma_2, component-wise.
VertexField volume_extension(const TetMesh& mesh, const InterfaceMap& interface,
                             const VertexField& surface_displacement);

/// Transpose of volume_extension: pulls a per-volume-vertex covector (e.g. a
/// volume shape derivative) back to the Gamma_1 surface, so that
/// dot(pullback, W) = dot(volume_field, volume_extension(W)) for every
/// surface field W.
VertexField extension_pullback(const TetMesh& mesh, const InterfaceMap& interface,
                               const VertexField& volume_field);

/// Radius ratio quality (3 inradius / circumradius) of the worst tet.
double min_tet_quality(const TetMesh& mesh);

/// Laplacian relaxation of the interior vertices (all boundary vertices stay
/// fixed, connectivity is untouched): `passes` sweeps of damped averaging
/// over the tet-edge neighbors. Returns the input unchanged if the result
/// would contain a non-positive tet.
TetMesh relax_interior(const TetMesh& mesh, int passes = 30, double omega = 0.5);

/// EIT loss over the Gamma_1 surface. Trial surfaces are propagated into the
/// volume by extending the total displacement from the initial reference mesh
/// via volume_extension; commit records the accepted surface and updates the
/// observable volume mesh, while the extension keeps acting from the
/// reference configuration.
class EitLoss final : public LossModel {
 public:
  EitLoss(TetMesh mesh, double alpha, std::vector<Eigen::VectorXd> data,
          LinearSolver solver = LinearSolver::Ldlt);

  double evaluate(const SurfaceMesh& gamma) override;
  VertexField gradient(const SurfaceMesh& gamma) override;
  void commit(const SurfaceMesh& gamma) override;

  const InterfaceMap& interface() const { return interface_; }
  const TetMesh& volume_mesh() const { return mesh_; }
  double quality_floor = 0.05;  // abort threshold for the radius ratio

 private:
  struct Evaluation {
    std::vector<Vec3> gamma_vertices;
    TetMesh mesh;
    FemSystem system;
    std::vector<Eigen::VectorXd> states;
    double loss = 0.0;
  };
  const Evaluation& prepare(const SurfaceMesh& gamma);
  TetMesh deform_to(const SurfaceMesh& gamma) const;

  TetMesh mesh_;             // last committed configuration (observable state)
  InterfaceMap interface_;
  TetMesh base_mesh_;        // pristine reference configuration for deform_to
  InterfaceMap base_interface_;
  double alpha_;
  std::vector<Eigen::VectorXd> data_;
  LinearSolver solver_;
  std::unique_ptr<Evaluation> cache_;
};

}  // namespace dtv
