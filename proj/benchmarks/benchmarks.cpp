#include "dtv/fem.hpp"
#include "dtv/functionals.hpp"
#include "dtv/s2.hpp"
#include "dtv/shapegrad.hpp"
#include "dtv/shapes.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using dtv::Vec3;

void BM_SphereOps(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  auto unit = [&] { return Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized().eval(); };
  const Vec3 n = unit();
  Vec3 m = unit();
  if (n.dot(m) < -0.99) m = -m;
  Vec3 xi = m - m.dot(n) * n;
  for (auto _ : state) {
    const Vec3 log_nm = dtv::s2::log_map(n, m);
    const Vec3 back = dtv::s2::exp_map(n, log_nm);
    benchmark::DoNotOptimize(dtv::s2::parallel_transport(n, back, xi));
  }
}
BENCHMARK(BM_SphereOps);

void BM_Dtv(benchmark::State& state) {
  const dtv::SurfaceMesh sphere = dtv::shapes::icosphere(static_cast<int>(state.range(0)), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtv::dtv(sphere).value);
  }
  state.SetItemsProcessed(state.iterations() * sphere.n_edges());
}
BENCHMARK(BM_Dtv)->Arg(3)->Arg(5);

void BM_PenaltyGradient(benchmark::State& state) {
  const dtv::SurfaceMesh sphere = dtv::shapes::icosphere(static_cast<int>(state.range(0)), 1.0);
  const auto geometry = dtv::compute_edge_geometry(sphere);
  std::vector<Vec3> d(sphere.edges.size(), Vec3::Zero()), b(sphere.edges.size(), Vec3::Zero());
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtv::penalty_gradient(sphere, d, b, 1e-3, 1e-2));
  }
}
BENCHMARK(BM_PenaltyGradient)->Arg(3)->Arg(4);

void BM_FemAssembly(benchmark::State& state) {
  const dtv::TetMesh mesh =
      dtv::shapes::shell_tet_mesh(dtv::shapes::InnerBoundary::Sphere, 0.5, 8, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtv::assemble(mesh, 1e-5));
  }
  state.SetItemsProcessed(state.iterations() * mesh.n_tets());
}
BENCHMARK(BM_FemAssembly);

}  // namespace

BENCHMARK_MAIN();
