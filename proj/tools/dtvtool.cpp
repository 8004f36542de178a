// Command line drivers for the total-variation shape prior: functional
// evaluation, the closed-form reference tables, mesh denoising, and the EIT
// inclusion-detection inverse problem.

#include "dtv/bregman.hpp"
#include "dtv/fem.hpp"
#include "dtv/functionals.hpp"
#include "dtv/mesh.hpp"
#include "dtv/shapegrad.hpp"
#include "dtv/shapes.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dtv;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// configuration and manifest handling
// ---------------------------------------------------------------------------

const std::set<std::string> kConfigKeys = {
    "alpha",    "lambda",      "beta",       "gamma",       "sigma",     "r",
    "grad_tol", "max_outer",   "inner_steps", "step0",      "seed",      "h1_scale",
    "true_mesh", "initial_mesh", "input_mesh", "out_prefix", "cube_half", "levels",
    "reference_mesh", "calibrate"};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json config = json::parse(in);
  if (!config.is_object()) throw std::runtime_error("config must be a JSON object");
  for (const auto& [key, value] : config.items()) {
    if (!kConfigKeys.count(key)) throw std::runtime_error("unknown config key: " + key);
  }
  return config;
}

// Pulls `key` from the config unless the flag was given on the command line.
template <typename T>
void apply_config(const CLI::App& app, const json& config, const std::string& flag,
                  const std::string& key, T& value) {
  const CLI::Option* opt = app.get_option_no_throw(flag);
  if (opt && opt->count() > 0) return;  // explicit flag wins
  if (config.contains(key)) value = config.at(key).get<T>();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setfill('0') << std::setw(16) << fnv1a(buffer.str());
  return hex.str();
}

void write_manifest(const std::string& out_prefix, const std::string& command,
                    const json& resolved, const std::vector<std::string>& inputs) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = resolved;
  json hashes = json::object();
  for (const std::string& path : inputs) hashes[path] = file_hash(path);
  manifest["input_hashes"] = hashes;
  std::ofstream out(out_prefix + "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest under prefix " + out_prefix);
  out << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// geometric report helpers
// ---------------------------------------------------------------------------

double rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return (p - (a + (d1 / (d1 - d3)) * ab)).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return (p - (a + (d2 / (d2 - d6)) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + (vb * denom) * ab + (vc * denom) * ac)).norm();
}

std::vector<Vec3> surface_samples(const SurfaceMesh& mesh) {
  std::vector<Vec3> samples = mesh.vertices;
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    samples.push_back(0.5 * (a + b));
    samples.push_back(0.5 * (b + c));
    samples.push_back(0.5 * (a + c));
    samples.push_back((a + b + c) / 3.0);
  }
  return samples;
}

double one_sided_hausdorff(const std::vector<Vec3>& points, const SurfaceMesh& target) {
  double worst = 0.0;
  for (const Vec3& p : points) {
    double nearest = 1e300;
    for (const auto& tri : target.triangles) {
      nearest = std::min(nearest,
                         point_triangle_distance(p, target.vertices[tri[0]],
                                                 target.vertices[tri[1]],
                                                 target.vertices[tri[2]]));
      if (nearest < 1e-12) break;
    }
    worst = std::max(worst, nearest);
  }
  return worst;
}

double hausdorff_distance(const SurfaceMesh& a, const SurfaceMesh& b) {
  return std::max(one_sided_hausdorff(surface_samples(a), b),
                  one_sided_hausdorff(surface_samples(b), a));
}

double flat_edge_fraction(const SurfaceMesh& mesh, double threshold) {
  const auto geometry = compute_edge_geometry(mesh);
  int flat = 0;
  for (const EdgeGeometry& g : geometry) {
    if (g.theta < threshold) ++flat;
  }
  return static_cast<double>(flat) / static_cast<double>(geometry.size());
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_dtv_eval(const std::string& mesh_path) {
  const SurfaceMesh mesh = read_off(mesh_path);
  std::cout << "vertices  " << mesh.n_vertices() << "\n"
            << "edges     " << mesh.n_edges() << "\n"
            << "triangles " << mesh.n_triangles() << "\n"
            << std::setprecision(12) << "area      " << surface_area(mesh).value << "\n"
            << "dtv       " << dtv::dtv(mesh).value << "\n"
            << "dtv (euclidean variant) " << dtv_euclidean(mesh).value << "\n";
  return 0;
}

int cmd_table1() {
  struct Row {
    const char* name;
    SurfaceMesh mesh;
    double edge_length, theta, expected_dtv;
    double tolerance;
  };
  std::vector<Row> rows;
  rows.push_back({"cube (crossed diagonals)", shapes::cube_crossed_diagonals(), 1.0, M_PI / 2,
                  6.0 * M_PI, 1e-12});
  rows.push_back({"regular tetrahedron", shapes::regular_tetrahedron(6.0),
                  std::sqrt(6.0 / std::sqrt(3.0)), std::acos(-1.0 / 3.0), 21.3365, 5e-4});
  rows.push_back({"regular icosahedron", shapes::icosahedron(6.0),
                  std::sqrt(6.0 / (5.0 * std::sqrt(3.0))), std::acos(std::sqrt(5.0) / 3.0),
                  18.2218, 5e-4});

  bool ok = true;
  std::cout << std::left << std::setw(26) << "shape" << std::right << std::setw(10) << "edge"
            << std::setw(8) << "count" << std::setw(10) << "theta" << std::setw(12) << "dtv"
            << std::setw(12) << "expected"
            << "\n";
  for (const Row& row : rows) {
    const double value = dtv::dtv(row.mesh).value;
    const double error = std::abs(value - row.expected_dtv) / std::abs(row.expected_dtv);
    ok = ok && error < row.tolerance;
    std::cout << std::left << std::setw(26) << row.name << std::right << std::fixed
              << std::setprecision(4) << std::setw(10) << row.edge_length << std::setw(8)
              << row.mesh.n_edges() << std::setw(10) << row.theta << std::setw(12) << value
              << std::setw(12) << row.expected_dtv << "\n";
    std::cout.unsetf(std::ios::fixed);
  }
  std::cout << (ok ? "all rows within tolerance" : "TOLERANCE VIOLATION") << "\n";
  return ok ? 0 : 1;
}

int cmd_sphere_table(int min_level, int max_level) {
  const double reference = 4.0 * std::sqrt(3.0 * M_PI);
  const double radius = std::sqrt(3.0 / (2.0 * M_PI));
  std::cout << "reference total variation 4 sqrt(3 pi) = " << std::setprecision(6) << reference
            << " (sphere of area 6)\n";
  std::cout << std::setw(6) << "level" << std::setw(9) << "V" << std::setw(9) << "E"
            << std::setw(9) << "F" << std::setw(12) << "dtv" << std::setw(10) << "ratio"
            << "\n";
  bool ok = true;
  double finest_ratio = 0.0;
  for (int level = min_level; level <= max_level; ++level) {
    const SurfaceMesh sphere = shapes::icosphere(level, radius);
    const double value = dtv::dtv(sphere).value;
    const double ratio = value / reference;
    finest_ratio = ratio;
    ok = ok && ratio > 1.3;
    std::cout << std::setw(6) << level << std::setw(9) << sphere.n_vertices() << std::setw(9)
              << sphere.n_edges() << std::setw(9) << sphere.n_triangles() << std::fixed
              << std::setprecision(4) << std::setw(12) << value << std::setw(10) << ratio
              << "\n";
    std::cout.unsetf(std::ios::fixed);
  }
  ok = ok && finest_ratio > 1.405 && finest_ratio < 1.425;
  std::cout << "limit of the ratio for fine triangulations: sqrt(2) = 1.41421\n";
  std::cout << (ok ? "ratios within the expected band" : "TOLERANCE VIOLATION") << "\n";
  return ok ? 0 : 1;
}

int cmd_stationarity() {
  const SurfaceMesh icosa = shapes::icosahedron(6.0);
  const double mu_icosa = -std::sqrt(3.0) * std::acos(std::sqrt(5.0) / 3.0) *
                          std::sqrt(5.0 * std::sqrt(3.0) / 6.0);
  const double res_icosa = field_max_norm(lagrangian_gradient(icosa, mu_icosa));

  const double mu_cube = -M_PI / 2.0;
  const double res_cube =
      field_max_norm(lagrangian_gradient(shapes::cube_crossed_diagonals(), mu_cube));

  const SurfaceMesh perturbed = add_vertex_noise(icosa, 1e-2, 99);
  const double res_control = field_max_norm(lagrangian_gradient(perturbed, mu_icosa));

  std::cout << std::setprecision(6) << "icosahedron  mu = " << mu_icosa
            << "  |grad|_inf = " << res_icosa << "\n"
            << "crossed cube mu = " << mu_cube << "  |grad|_inf = " << res_cube << "\n"
            << "perturbed icosahedron (negative control) |grad|_inf = " << res_control << "\n";
  const bool ok = res_icosa < 1e-10 && res_cube < 1e-10 && res_control > 1e-4;
  std::cout << (ok ? "stationarity confirmed" : "TOLERANCE VIOLATION") << "\n";
  return ok ? 0 : 1;
}

struct DenoiseOptions {
  std::string input_mesh;  // clean reference; procedural box when empty
  std::string out_prefix = "denoise_";
  double sigma = 0.2;
  std::uint64_t seed = 7;
  double beta = 0.0;  // 0 = run the full sweep
  double lambda = 0.0;
  int inner_steps = 10;
  double step0 = 1.0;
  double grad_tol = 1e-7;
  int max_outer = 30;
};

int cmd_denoise(const DenoiseOptions& options) {
  SurfaceMesh clean;
  if (options.input_mesh.empty()) {
    clean = shapes::box(Vec3(-1.0, -1.5, -2.0), Vec3(1.0, 1.5, 2.0), 8, 12, 16);
  } else {
    clean = read_off(options.input_mesh);
  }
  const SurfaceMesh noisy = add_vertex_noise(clean, options.sigma, options.seed);
  write_off(clean, options.out_prefix + "clean.off");
  write_off(noisy, options.out_prefix + "noisy.off");
  const double rmse_noisy = rmse(noisy.vertices, clean.vertices);
  std::cout << std::setprecision(6) << "noisy input rmse " << rmse_noisy << "\n";

  BregmanConfig base;
  base.inner_steps = options.inner_steps;
  base.step0 = options.step0;
  base.grad_tol = options.grad_tol;
  base.max_outer = options.max_outer;

  auto run_tv = [&](double beta, double lambda, const std::string& tag) {
    BregmanConfig config = base;
    config.beta = beta;
    config.lambda = lambda > 0.0 ? lambda : 10.0 * beta;
    FidelityLoss loss(noisy.vertices);
    const RunResult result = run(noisy, config, loss);
    write_off(result.mesh, options.out_prefix + tag + ".off");
    write_history_csv(result.history, options.out_prefix + tag + "_history.csv");
    const double r = rmse(result.mesh.vertices, clean.vertices);
    std::cout << "tv    beta=" << beta << " lambda=" << config.lambda << " rmse=" << r
              << " iters=" << result.history.size() << "\n";
    return r;
  };
  auto run_area = [&](double gamma, const std::string& tag) {
    FidelityLoss loss(noisy.vertices);
    const RunResult result = area_regularized_descent(noisy, base, loss, gamma);
    write_off(result.mesh, options.out_prefix + tag + ".off");
    write_history_csv(result.history, options.out_prefix + tag + "_history.csv");
    const double r = rmse(result.mesh.vertices, clean.vertices);
    std::cout << "area  gamma=" << gamma << " rmse=" << r << " iters=" << result.history.size()
              << "\n";
    return r;
  };

  if (options.beta > 0.0) {
    const double r = run_tv(options.beta, options.lambda, "tv");
    return r < rmse_noisy ? 0 : 1;
  }

  // Full comparison sweep: TV prior against the area prior.
  double best_tv = 1e300, best_area = 1e300;
  int index = 0;
  for (double beta : {1e-2, 1e-3, 1e-4}) {
    best_tv = std::min(best_tv, run_tv(beta, 0.0, "tv" + std::to_string(index++)));
  }
  index = 0;
  for (double gamma : {0.02, 0.01, 0.005}) {
    best_area = std::min(best_area, run_area(gamma, "area" + std::to_string(index++)));
  }
  std::cout << "best rmse: tv=" << best_tv << " area=" << best_area << " noisy=" << rmse_noisy
            << "\n";
  const bool ok = best_tv < rmse_noisy && best_tv < best_area;
  std::cout << (ok ? "tv prior wins" : "TOLERANCE VIOLATION") << "\n";
  return ok ? 0 : 1;
}

struct EitOptions {
  std::string true_mesh;     // generated procedurally when empty
  std::string initial_mesh;  // generated procedurally when empty
  std::string out_prefix = "eit_";
  int r = 48;
  double alpha = 1e-5;
  double sigma = 0.0;
  double beta = 1e-6;
  double lambda = 1e-5;
  double grad_tol = 1e-7;
  int max_outer = 40;
  int inner_steps = 10;
  double step0 = 1e2;
  std::uint64_t seed = 1;
  double cube_half = 0.4;
  double gamma = 0.0;  // > 0: area-regularized reference run instead of TV
  double h1_scale = 1e-1;
  std::string reference_mesh;  // fine mesh of the initial shape; procedural when empty
  bool calibrate = true;       // difference calibration against the reference mesh
};

int cmd_eit(const EitOptions& options) {
  TetMesh truth, initial;
  if (options.true_mesh.empty()) {
    truth = shapes::shell_tet_mesh(shapes::InnerBoundary::Cube, options.cube_half, 12, 10);
    write_msh2(truth, options.out_prefix + "true.msh");
  } else {
    truth = read_msh2(options.true_mesh);
  }
  if (options.initial_mesh.empty()) {
    initial = shapes::icosphere_shell_tet_mesh(0.5, 3, 6);
    write_msh2(initial, options.out_prefix + "initial.msh");
  } else {
    initial = read_msh2(options.initial_mesh);
  }
  truth.validate();
  initial.validate();

  std::vector<Eigen::VectorXd> data =
      synthesize_data(truth, initial, options.r, options.alpha, options.sigma, options.seed);
  std::cout << "mean data range on the measurement boundary: " << std::setprecision(4)
            << mean_data_range(initial, data) << "\n";
  if (options.calibrate) {
    const TetMesh reference =
        options.reference_mesh.empty()
            ? shapes::shell_tet_mesh(shapes::InnerBoundary::Sphere, 0.5, 12, 10)
            : read_msh2(options.reference_mesh);
    data = calibrate_data(reference, initial, std::move(data), options.alpha);
  }

  BregmanConfig config;
  config.beta = options.beta;
  config.lambda = options.lambda;
  config.inner_steps = options.inner_steps;
  config.step0 = options.step0;
  config.grad_tol = options.grad_tol;
  config.max_outer = options.max_outer;
  config.smooth_gradient = true;
  config.h1_scale = options.h1_scale;

  const SurfaceMesh true_gamma = extract_interface(truth).surface;
  EitLoss loss(initial, options.alpha, data);
  const SurfaceMesh gamma0 = loss.interface().surface;
  const double initial_loss = loss.evaluate(gamma0);
  const double hausdorff0 = hausdorff_distance(gamma0, true_gamma);
  std::cout << "initial loss " << initial_loss << ", initial Hausdorff distance " << hausdorff0
            << "\n";

  int iteration = 0;
  auto on_iteration = [&](const SurfaceMesh& gamma, const HistoryRow& row) {
    std::ostringstream name;
    name << options.out_prefix << "gamma_" << std::setw(4) << std::setfill('0') << iteration++
         << ".off";
    write_off(gamma, name.str());
    std::cout << "k=" << row.k << " loss=" << row.loss << " dtv=" << row.dtv
              << " grad_norm=" << row.grad_norm << " steps=" << row.step_count << "\n";
  };

  const RunResult result =
      options.gamma > 0.0
          ? area_regularized_descent(gamma0, config, loss, options.gamma, on_iteration)
          : run(gamma0, config, loss, on_iteration);
  write_history_csv(result.history, options.out_prefix + "history.csv");
  write_off(result.mesh, options.out_prefix + "gamma_final.off");
  write_ply(result.mesh, options.out_prefix + "gamma_final.ply");

  if (result.aborted) std::cout << "aborted: " << *result.aborted << "\n";
  const double final_loss =
      result.history.empty() ? initial_loss : result.history.back().loss;
  const double hausdorff_final = hausdorff_distance(result.mesh, true_gamma);
  std::cout << "final loss " << final_loss << " (" << final_loss / initial_loss
            << " of initial)\n"
            << "final Hausdorff distance " << hausdorff_final << " ("
            << hausdorff0 / hausdorff_final << "x reduction)\n"
            << "flat-edge fraction (theta < 0.05) " << flat_edge_fraction(result.mesh, 0.05)
            << "\n";
  return result.aborted ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete total variation of the normal: evaluation and experiments"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file");

  // dtv-eval
  std::string eval_mesh;
  CLI::App* eval = app.add_subcommand("dtv-eval", "Evaluate functionals on an OFF mesh");
  eval->add_option("--mesh", eval_mesh, "Input OFF mesh")->required();

  // table1 / sphere-table / stationarity
  app.add_subcommand("table1", "Total variation of cube, tetrahedron, icosahedron");
  int min_level = 2, max_level = 5;
  CLI::App* sphere = app.add_subcommand("sphere-table", "DTV on icosphere refinements");
  sphere->add_option("--min-level", min_level, "Coarsest subdivision level");
  sphere->add_option("--max-level", max_level, "Finest subdivision level");
  app.add_subcommand("stationarity", "Generalized-gradient residuals at stationary shapes");

  // denoise
  DenoiseOptions denoise;
  CLI::App* den = app.add_subcommand("denoise", "Denoise a box mesh with the TV prior");
  den->add_option("--input", denoise.input_mesh, "Clean reference mesh (OFF); default box");
  den->add_option("--out-prefix", denoise.out_prefix, "Output file prefix");
  den->add_option("--sigma", denoise.sigma, "Relative noise level");
  den->add_option("--seed", denoise.seed, "Noise seed");
  den->add_option("--beta", denoise.beta, "TV weight (omit to sweep)");
  den->add_option("--lambda", denoise.lambda, "Penalty weight (default 10*beta)");
  den->add_option("--inner-steps", denoise.inner_steps, "Gradient steps per outer iteration");
  den->add_option("--step0", denoise.step0, "Initial Armijo step");
  den->add_option("--grad-tol", denoise.grad_tol, "Termination gradient norm");
  den->add_option("--max-outer", denoise.max_outer, "Outer iteration cap");

  // eit
  EitOptions eit;
  CLI::App* eitcmd = app.add_subcommand("eit", "EIT inclusion detection inverse problem");
  eitcmd->add_option("--true-mesh", eit.true_mesh, "True-inclusion MSH mesh (default generated)");
  eitcmd->add_option("--initial-mesh", eit.initial_mesh, "Initial MSH mesh (default generated)");
  eitcmd->add_option("--out-prefix", eit.out_prefix, "Output file prefix");
  eitcmd->add_option("--r", eit.r, "Number of source patches");
  eitcmd->add_option("--alpha", eit.alpha, "Robin coefficient");
  eitcmd->add_option("--sigma", eit.sigma, "Measurement noise std");
  eitcmd->add_option("--beta", eit.beta, "TV weight");
  eitcmd->add_option("--lambda", eit.lambda, "Penalty weight");
  eitcmd->add_option("--grad-tol", eit.grad_tol, "Termination gradient norm");
  eitcmd->add_option("--max-outer", eit.max_outer, "Outer iteration cap");
  eitcmd->add_option("--inner-steps", eit.inner_steps, "Gradient steps per outer iteration");
  eitcmd->add_option("--step0", eit.step0, "Initial Armijo step");
  eitcmd->add_option("--seed", eit.seed, "Noise seed");
  eitcmd->add_option("--cube-half", eit.cube_half, "Half width of the true cube inclusion");
  eitcmd->add_option("--gamma", eit.gamma, "Run the area-regularized reference instead");
  eitcmd->add_option("--h1-scale", eit.h1_scale, "Riesz smoothing scale for the descent field");
  eitcmd->add_option("--reference-mesh", eit.reference_mesh,
                     "Fine mesh of the initial shape for difference calibration");
  eitcmd->add_flag("!--no-calibrate", eit.calibrate,
                   "Skip difference calibration of the synthetic data");

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = load_config(config_path);

    if (den->parsed()) {
      apply_config(*den, config, "--sigma", "sigma", denoise.sigma);
      apply_config(*den, config, "--seed", "seed", denoise.seed);
      apply_config(*den, config, "--beta", "beta", denoise.beta);
      apply_config(*den, config, "--lambda", "lambda", denoise.lambda);
      apply_config(*den, config, "--inner-steps", "inner_steps", denoise.inner_steps);
      apply_config(*den, config, "--step0", "step0", denoise.step0);
      apply_config(*den, config, "--grad-tol", "grad_tol", denoise.grad_tol);
      apply_config(*den, config, "--max-outer", "max_outer", denoise.max_outer);
      apply_config(*den, config, "--input", "input_mesh", denoise.input_mesh);
      apply_config(*den, config, "--out-prefix", "out_prefix", denoise.out_prefix);
    }
    if (eitcmd->parsed()) {
      apply_config(*eitcmd, config, "--r", "r", eit.r);
      apply_config(*eitcmd, config, "--alpha", "alpha", eit.alpha);
      apply_config(*eitcmd, config, "--sigma", "sigma", eit.sigma);
      apply_config(*eitcmd, config, "--beta", "beta", eit.beta);
      apply_config(*eitcmd, config, "--lambda", "lambda", eit.lambda);
      apply_config(*eitcmd, config, "--grad-tol", "grad_tol", eit.grad_tol);
      apply_config(*eitcmd, config, "--max-outer", "max_outer", eit.max_outer);
      apply_config(*eitcmd, config, "--inner-steps", "inner_steps", eit.inner_steps);
      apply_config(*eitcmd, config, "--step0", "step0", eit.step0);
      apply_config(*eitcmd, config, "--seed", "seed", eit.seed);
      apply_config(*eitcmd, config, "--gamma", "gamma", eit.gamma);
      apply_config(*eitcmd, config, "--cube-half", "cube_half", eit.cube_half);
      apply_config(*eitcmd, config, "--h1-scale", "h1_scale", eit.h1_scale);
      apply_config(*eitcmd, config, "--reference-mesh", "reference_mesh", eit.reference_mesh);
      apply_config(*eitcmd, config, "--no-calibrate", "calibrate", eit.calibrate);
      apply_config(*eitcmd, config, "--true-mesh", "true_mesh", eit.true_mesh);
      apply_config(*eitcmd, config, "--initial-mesh", "initial_mesh", eit.initial_mesh);
      apply_config(*eitcmd, config, "--out-prefix", "out_prefix", eit.out_prefix);
    }

    if (eval->parsed()) return cmd_dtv_eval(eval_mesh);
    if (app.get_subcommand("table1")->parsed()) return cmd_table1();
    if (sphere->parsed()) return cmd_sphere_table(min_level, max_level);
    if (app.get_subcommand("stationarity")->parsed()) return cmd_stationarity();
    if (den->parsed()) {
      json resolved;
      resolved["sigma"] = denoise.sigma;
      resolved["seed"] = denoise.seed;
      resolved["beta"] = denoise.beta;
      resolved["lambda"] = denoise.lambda;
      resolved["inner_steps"] = denoise.inner_steps;
      resolved["step0"] = denoise.step0;
      resolved["grad_tol"] = denoise.grad_tol;
      resolved["max_outer"] = denoise.max_outer;
      resolved["input_mesh"] = denoise.input_mesh;
      resolved["out_prefix"] = denoise.out_prefix;
      std::vector<std::string> inputs;
      if (!denoise.input_mesh.empty()) inputs.push_back(denoise.input_mesh);
      write_manifest(denoise.out_prefix, "denoise", resolved, inputs);
      return cmd_denoise(denoise);
    }
    if (eitcmd->parsed()) {
      json resolved;
      resolved["r"] = eit.r;
      resolved["alpha"] = eit.alpha;
      resolved["sigma"] = eit.sigma;
      resolved["beta"] = eit.beta;
      resolved["lambda"] = eit.lambda;
      resolved["gamma"] = eit.gamma;
      resolved["grad_tol"] = eit.grad_tol;
      resolved["max_outer"] = eit.max_outer;
      resolved["inner_steps"] = eit.inner_steps;
      resolved["step0"] = eit.step0;
      resolved["seed"] = eit.seed;
      resolved["cube_half"] = eit.cube_half;
      resolved["h1_scale"] = eit.h1_scale;
      resolved["reference_mesh"] = eit.reference_mesh;
      resolved["calibrate"] = eit.calibrate;
      resolved["true_mesh"] = eit.true_mesh;
      resolved["initial_mesh"] = eit.initial_mesh;
      resolved["out_prefix"] = eit.out_prefix;
      std::vector<std::string> inputs;
      if (!eit.true_mesh.empty()) inputs.push_back(eit.true_mesh);
      if (!eit.initial_mesh.empty()) inputs.push_back(eit.initial_mesh);
      write_manifest(eit.out_prefix, "eit", resolved, inputs);
      return cmd_eit(eit);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
