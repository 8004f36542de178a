#pragma once

#include "dtv/mesh.hpp"

#include <optional>
#include <vector>

namespace dtv {

struct FunctionalValue {
  double value = 0.0;
  std::optional<std::vector<double>> per_edge;  // H_E = |E| Theta_E
};

/// Mesh denoising data: per-vertex fidelity targets and prior weight.
struct DenoiseProblem {
  VertexField noisy_targets;
  double weight = 0.0;  // beta (TV prior) or gamma (area prior)
};

/// Discrete total variation of the normal, sum over edges of d(n+, n-) |E|.
FunctionalValue dtv(const SurfaceMesh& mesh, bool per_edge = false);

/// Euclidean variant |n+ - n-|_2 |E|; an underestimator of dtv.
FunctionalValue dtv_euclidean(const SurfaceMesh& mesh, bool per_edge = false);

/// Total surface area.
FunctionalValue surface_area(const SurfaceMesh& mesh);

/// Returns (dtv(alpha * mesh), alpha * dtv(mesh)); the two must agree since
/// the functional is positively homogeneous of degree one.
std::pair<double, double> dtv_scaling_check(const SurfaceMesh& mesh, double alpha);

/// Generalized gradient of sum_E d(n+,n-)|E| + mu * area at each vertex:
///   sum_{j in N(i)} [ d/|E_ij| + (mu/2)(cot a_ij + cot b_ij) ] (x_i - x_j).
/// Valid Clarke-subgradient selection also at zero dihedral angles.
VertexField lagrangian_gradient(const SurfaceMesh& mesh, double mu);

/// Gradient of the total surface area alone (cotangent formula).
VertexField area_gradient(const SurfaceMesh& mesh);

/// Fidelity value (1/2) sum |x - xtilde|^2 and its exact gradient.
std::pair<double, VertexField> denoise_loss(const SurfaceMesh& mesh,
                                            const DenoiseProblem& problem);

}  // namespace dtv
