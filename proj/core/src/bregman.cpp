#include "dtv/bregman.hpp"

#include "dtv/functionals.hpp"
#include "dtv/s2.hpp"
#include "dtv/shapegrad.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>

namespace dtv {

void BregmanConfig::validate() const {
  if (beta <= 0.0) throw std::invalid_argument("BregmanConfig: beta must be positive");
  if (lambda <= 0.0) throw std::invalid_argument("BregmanConfig: lambda must be positive");
  if (inner_steps < 1) throw std::invalid_argument("BregmanConfig: inner_steps must be >= 1");
}

BregmanState BregmanState::zeros(const SurfaceMesh& mesh) {
  BregmanState state;
  state.d.assign(mesh.edges.size(), Vec3::Zero());
  state.b.assign(mesh.edges.size(), Vec3::Zero());
  return state;
}

double FidelityLoss::evaluate(const SurfaceMesh& mesh) {
  return denoise_loss(mesh, DenoiseProblem{targets_, 0.0}).first;
}

VertexField FidelityLoss::gradient(const SurfaceMesh& mesh) {
  return denoise_loss(mesh, DenoiseProblem{targets_, 0.0}).second;
}

double penalty_value(const SurfaceMesh& mesh, const BregmanState& state,
                     const BregmanConfig& config) {
  const auto geometry = compute_edge_geometry(mesh);
  double value = 0.0;
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const EdgeGeometry& g = geometry[i];
    const Vec3 log_nm = s2::log_map(g.n_plus, g.n_minus, "penalty_value");
    value += config.beta * state.d[i].norm() * g.length;
    value += 0.5 * config.lambda * g.length * (state.d[i] - log_nm - state.b[i]).squaredNorm();
  }
  return value;
}

double penalty_residual(const SurfaceMesh& mesh, const BregmanState& state) {
  const auto geometry = compute_edge_geometry(mesh);
  double value = 0.0;
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const EdgeGeometry& g = geometry[i];
    const Vec3 log_nm = s2::log_map(g.n_plus, g.n_minus, "penalty_residual");
    value += g.length * (state.d[i] - log_nm - state.b[i]).squaredNorm();
  }
  return value;
}

double augmented_lagrangian(const SurfaceMesh& mesh, const BregmanState& state,
                            const BregmanConfig& config, LossModel& loss) {
  return loss.evaluate(mesh) + penalty_value(mesh, state, config);
}

Vec3 shrink(const Vec3& v, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("shrink: kappa must be >= 0");
  const double len = v.norm();
  if (len <= kappa) return Vec3::Zero();
  return ((len - kappa) / len) * v;
}

void d_update(const SurfaceMesh& mesh, BregmanState& state, const BregmanConfig& config) {
  const auto geometry = compute_edge_geometry(mesh);
  const double kappa = config.beta / config.lambda;
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const EdgeGeometry& g = geometry[i];
    const Vec3 log_nm = s2::log_map(g.n_plus, g.n_minus, "d_update");
    state.d[i] = shrink(log_nm + state.b[i], kappa);
  }
}

void b_update(const SurfaceMesh& mesh, BregmanState& state) {
  const auto geometry = compute_edge_geometry(mesh);
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const EdgeGeometry& g = geometry[i];
    state.b[i] += s2::log_map(g.n_plus, g.n_minus, "b_update") - state.d[i];
  }
}

void transport_state(const SurfaceMesh& old_mesh, const SurfaceMesh& new_mesh,
                     BregmanState& state) {
  if (old_mesh.edges.size() != new_mesh.edges.size()) {
    throw std::invalid_argument("transport_state: connectivity mismatch");
  }
  for (std::size_t i = 0; i < old_mesh.edges.size(); ++i) {
    const Vec3 n_old = old_mesh.facet_normal(old_mesh.edges[i].facet_plus);
    const Vec3 n_new = new_mesh.facet_normal(new_mesh.edges[i].facet_plus);
    try {
      state.b[i] = s2::parallel_transport(n_old, n_new, state.b[i], "transport_state");
    } catch (const s2::AntipodalError&) {
      throw std::runtime_error(
          "transport_state: normal flipped to antipodal across the shape step at edge #" +
          std::to_string(i) + "; mesh is corrupted and remeshing is not supported");
    }
  }
}

namespace {

// One Armijo line search along -direction. Returns the accepted mesh (or the
// input when no step is accepted) together with the new objective value.
struct LineSearchResult {
  SurfaceMesh mesh;
  double value = 0.0;
  bool accepted = false;
};

template <typename Objective>
LineSearchResult armijo_step(const SurfaceMesh& mesh, double value,
                             const VertexField& direction, double decrease_estimate,
                             const BregmanConfig& config, Objective&& objective) {
  double t = config.step0;
  for (int attempt = 0; attempt < config.max_backtracks; ++attempt, t *= config.backtrack_factor) {
    std::vector<Vec3> trial_vertices = mesh.vertices;
    for (std::size_t i = 0; i < trial_vertices.size(); ++i) {
      trial_vertices[i] -= t * direction[i];
    }
    SurfaceMesh trial;
    try {
      trial = mesh.with_vertices(trial_vertices);
    } catch (const MeshError&) {
      continue;  // degenerate trial; shorten the step
    }
    double trial_value;
    try {
      trial_value = objective(trial);
    } catch (const s2::AntipodalError&) {
      continue;
    } catch (const MeshCorruptionError&) {
      continue;  // too-large deformation; shorten the step
    }
    if (trial_value <= value - config.armijo_c * t * decrease_estimate) {
      return {std::move(trial), trial_value, true};
    }
  }
  return {mesh, value, false};
}

template <typename GradientFn, typename Objective>
SubstepResult descent_loop(const SurfaceMesh& mesh, const BregmanConfig& config, int n_steps,
                           LossModel& loss, GradientFn&& gradient_fn, Objective&& objective) {
  SubstepResult result;
  result.mesh = mesh;
  double value = objective(result.mesh);
  for (int step = 0; step < n_steps; ++step) {
    const VertexField rhs = gradient_fn(result.mesh);
    VertexField direction =
        config.smooth_gradient ? h1_surface_gradient(result.mesh, rhs, config.h1_scale) : rhs;
    const double decrease = field_dot(rhs, direction);
    const double grad_norm = std::sqrt(std::max(decrease, 0.0));
    if (step == 0) result.initial_grad_norm = grad_norm;
    if (grad_norm <= config.grad_tol) break;
    LineSearchResult ls =
        armijo_step(result.mesh, value, direction, decrease, config, objective);
    if (!ls.accepted) break;  // zero step; flagged via accepted_steps
    result.mesh = std::move(ls.mesh);
    value = ls.value;
    loss.commit(result.mesh);
    ++result.accepted_steps;
  }
  return result;
}

}  // namespace

SubstepResult shape_substep(const SurfaceMesh& mesh, const BregmanState& state,
                            const BregmanConfig& config, LossModel& loss) {
  auto objective = [&](const SurfaceMesh& m) {
    return loss.evaluate(m) + penalty_value(m, state, config);
  };
  auto gradient_fn = [&](const SurfaceMesh& m) {
    VertexField g = loss.gradient(m);
    const VertexField p = penalty_gradient(m, state.d, state.b, config.beta, config.lambda);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += p[i];
    return g;
  };
  return descent_loop(mesh, config, config.inner_steps, loss, gradient_fn, objective);
}

RunResult run(const SurfaceMesh& initial_mesh, const BregmanConfig& config, LossModel& loss,
              const IterationCallback& on_iteration) {
  config.validate();
  RunResult result;
  result.mesh = initial_mesh;
  BregmanState state = BregmanState::zeros(initial_mesh);

  for (int k = 0; k < config.max_outer; ++k) {
    SubstepResult sub;
    try {
      sub = shape_substep(result.mesh, state, config, loss);
      transport_state(result.mesh, sub.mesh, state);
    } catch (const std::runtime_error& e) {
      result.aborted = e.what();
      break;
    }
    result.mesh = std::move(sub.mesh);
    d_update(result.mesh, state, config);
    b_update(result.mesh, state);
    state.iteration = k + 1;

    HistoryRow row;
    row.k = k;
    row.lagrangian = augmented_lagrangian(result.mesh, state, config, loss);
    row.loss = loss.evaluate(result.mesh);
    row.dtv = dtv(result.mesh).value;
    row.penalty_residual = penalty_residual(result.mesh, state);
    row.grad_norm = sub.initial_grad_norm;
    row.step_count = sub.accepted_steps;
    result.history.push_back(row);
    if (on_iteration) on_iteration(result.mesh, row);

    if (sub.initial_grad_norm < config.grad_tol) break;
  }
  return result;
}

RunResult area_regularized_descent(const SurfaceMesh& initial_mesh, const BregmanConfig& config,
                                   LossModel& loss, double gamma,
                                   const IterationCallback& on_iteration) {
  auto objective = [&](const SurfaceMesh& m) {
    return loss.evaluate(m) + gamma * surface_area(m).value;
  };
  auto gradient_fn = [&](const SurfaceMesh& m) {
    VertexField g = loss.gradient(m);
    const VertexField a = area_gradient(m);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gamma * a[i];
    return g;
  };

  RunResult result;
  result.mesh = initial_mesh;
  for (int k = 0; k < config.max_outer; ++k) {
    SubstepResult sub;
    try {
      sub = descent_loop(result.mesh, config, config.inner_steps, loss, gradient_fn, objective);
    } catch (const std::runtime_error& e) {
      result.aborted = e.what();
      break;
    }
    result.mesh = std::move(sub.mesh);

    HistoryRow row;
    row.k = k;
    row.loss = loss.evaluate(result.mesh);
    row.dtv = dtv(result.mesh).value;
    row.lagrangian = row.loss + gamma * surface_area(result.mesh).value;
    row.grad_norm = sub.initial_grad_norm;
    row.step_count = sub.accepted_steps;
    result.history.push_back(row);
    if (on_iteration) on_iteration(result.mesh, row);

    if (sub.initial_grad_norm < config.grad_tol || sub.accepted_steps == 0) break;
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  out << "k,L,loss,dtv,penalty_residual,grad_norm,step_count\n";
  for (const HistoryRow& row : history) {
    out << row.k << "," << row.lagrangian << "," << row.loss << "," << row.dtv << ","
        << row.penalty_residual << "," << row.grad_norm << "," << row.step_count << "\n";
  }
}

}  // namespace dtv
