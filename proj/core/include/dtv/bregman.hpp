#pragma once

#include "dtv/mesh.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dtv {

struct BregmanConfig {
  double beta = 1e-3;    // TV weight
  double lambda = 1e-5;  // penalty weight
  int inner_steps = 10;  // gradient steps per outer iteration
  double step0 = 1.0;    // initial Armijo step
  double grad_tol = 1e-7;
  int max_outer = 500;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 30;
  bool smooth_gradient = false;  // Laplace-Beltrami Riesz smoothing of the descent field
  double h1_scale = 1e-4;

  void validate() const;
};

/// Per-edge splitting variable d_E and multiplier b_E, both tangent to S^2 at
/// the current n_E^+.
struct BregmanState {
  std::vector<Vec3> d;
  std::vector<Vec3> b;
  int iteration = 0;

  static BregmanState zeros(const SurfaceMesh& mesh);
};

/// Loss term: value and Euclidean gradient with respect to the surface
/// vertex positions. commit() is called once per accepted descent step so
/// stateful models (a deforming volume mesh) can follow the surface.
class LossModel {
 public:
  virtual ~LossModel() = default;
  virtual double evaluate(const SurfaceMesh& mesh) = 0;
  virtual VertexField gradient(const SurfaceMesh& mesh) = 0;
  virtual void commit(const SurfaceMesh& /*mesh*/) {}
};

/// Zero loss, for prior-only experiments and tests.
class ZeroLoss final : public LossModel {
 public:
  double evaluate(const SurfaceMesh&) override { return 0.0; }
  VertexField gradient(const SurfaceMesh& mesh) override {
    return VertexField(mesh.vertices.size(), Vec3::Zero());
  }
};

/// Fidelity loss (1/2) sum_V |x_V - xtilde_V|^2.
class FidelityLoss final : public LossModel {
 public:
  explicit FidelityLoss(VertexField targets) : targets_(std::move(targets)) {}
  double evaluate(const SurfaceMesh& mesh) override;
  VertexField gradient(const SurfaceMesh& mesh) override;

 private:
  VertexField targets_;
};

struct HistoryRow {
  int k = 0;
  double lagrangian = 0.0;
  double loss = 0.0;
  double dtv = 0.0;
  double penalty_residual = 0.0;  // sum |E| |d - log - b|^2
  double grad_norm = 0.0;         // initial inner gradient norm, H^1 sense when smoothed
  int step_count = 0;             // accepted inner steps
};

struct RunResult {
  SurfaceMesh mesh;
  std::vector<HistoryRow> history;
  // Set when the run stopped on a mesh-corruption diagnostic; mesh and
  // history then hold the best state reached.
  std::optional<std::string> aborted;
};

/// beta sum |d_E| |E| + (lambda/2) sum |E| |d_E - log(n+, n-) - b_E|^2.
double penalty_value(const SurfaceMesh& mesh, const BregmanState& state,
                     const BregmanConfig& config);

double penalty_residual(const SurfaceMesh& mesh, const BregmanState& state);

double augmented_lagrangian(const SurfaceMesh& mesh, const BregmanState& state,
                            const BregmanConfig& config, LossModel& loss);

/// Vectorial soft threshold max(|v| - kappa, 0) v/|v|.
Vec3 shrink(const Vec3& v, double kappa);

/// d_E := shrink(log(n+, n-) + b_E, beta/lambda); independent of previous d.
void d_update(const SurfaceMesh& mesh, BregmanState& state, const BregmanConfig& config);

/// b_E += log(n+, n-) - d_E.
void b_update(const SurfaceMesh& mesh, BregmanState& state);

/// Parallel transport of each b_E from the old n_E^+ to the new one; d is not
/// transported (it is recomputed).
void transport_state(const SurfaceMesh& old_mesh, const SurfaceMesh& new_mesh,
                     BregmanState& state);

struct SubstepResult {
  SurfaceMesh mesh;
  double initial_grad_norm = 0.0;
  int accepted_steps = 0;
};

/// inner_steps Armijo-backtracking descent steps on the augmented Lagrangian
/// at fixed (d, b).
SubstepResult shape_substep(const SurfaceMesh& mesh, const BregmanState& state,
                            const BregmanConfig& config, LossModel& loss);

/// Invoked after each outer iteration with the current mesh and history row.
using IterationCallback = std::function<void(const SurfaceMesh&, const HistoryRow&)>;

/// Full split Bregman iteration starting from d = b = 0.
RunResult run(const SurfaceMesh& initial_mesh, const BregmanConfig& config, LossModel& loss,
              const IterationCallback& on_iteration = {});

/// Plain Armijo gradient descent on loss + gamma * surface area, the smooth
/// reference scheme the TV prior is compared against.
RunResult area_regularized_descent(const SurfaceMesh& initial_mesh, const BregmanConfig& config,
                                   LossModel& loss, double gamma,
                                   const IterationCallback& on_iteration = {});

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace dtv
