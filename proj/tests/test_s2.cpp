#include "dtv/s2.hpp"

#include "test_utils.hpp"

#include <doctest.h>

#include <random>

using dtv::Vec3;
namespace s2 = dtv::s2;

namespace {
const Vec3 e1 = Vec3::UnitX();
const Vec3 e2 = Vec3::UnitY();
const Vec3 e3 = Vec3::UnitZ();
}  // namespace

TEST_CASE("geodesic distance on axis pairs") {
  CHECK(s2::geodesic_distance(e1, e1) == doctest::Approx(0.0));
  CHECK(s2::geodesic_distance(e1, e2) == doctest::Approx(M_PI / 2));
  CHECK(s2::geodesic_distance(e1, -e1) == doctest::Approx(M_PI));
  const Vec3 diag = (e1 + e2).normalized();
  CHECK(s2::geodesic_distance(e1, diag) == doctest::Approx(M_PI / 4));
}

TEST_CASE("distance survives dot products slightly outside [-1, 1]") {
  // Unit vectors built from normalized input can have n.m = 1 + few ulp.
  const Vec3 n = Vec3(0.1, 0.2, 0.3).normalized();
  // acos near 1 can round to a few 1e-8 instead of exactly 0
  CHECK(s2::geodesic_distance(n, n) < 1e-7);
  CHECK(s2::geodesic_distance(n, -n) == doctest::Approx(M_PI));
}

TEST_CASE("exp map on great circles") {
  CHECK((s2::exp_map(e1, (M_PI / 2) * e2) - e2).norm() < 1e-15);
  CHECK((s2::exp_map(e1, M_PI * e2) + e1).norm() < 1e-15);
  CHECK((s2::exp_map(e3, (M_PI / 4) * e1) - (e1 + e3).normalized()).norm() < 1e-15);
  // zero tangent is the identity
  CHECK((s2::exp_map(e1, Vec3::Zero()) - e1).norm() == 0.0);
}

TEST_CASE("log map on great circles") {
  CHECK((s2::log_map(e1, e2) - (M_PI / 2) * e2).norm() < 1e-15);
  CHECK(s2::log_map(e1, e1).norm() == 0.0);
  CHECK_THROWS_AS((void)s2::log_map(e1, -e1), s2::AntipodalError);
}

TEST_CASE("exp/log round trips over random samples") {
  std::mt19937_64 rng(20260823);
  double worst_exp_log = 0.0, worst_log_exp = 0.0, worst_len = 0.0;
  int used = 0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 n = dtv::testing::random_unit(rng);
    const Vec3 m = dtv::testing::random_unit(rng);
    if (n.dot(m) < -1.0 + 1e-6) continue;  // stay away from the cut locus
    ++used;

    const Vec3 xi = s2::log_map(n, m);
    worst_len = std::max(worst_len, std::abs(xi.norm() - s2::geodesic_distance(n, m)));
    worst_exp_log = std::max(worst_exp_log, (s2::exp_map(n, xi) - m).norm());

    Vec3 eta = dtv::testing::random_tangent(rng, n);
    eta *= (0.9 * M_PI) / std::max(eta.norm(), 1e-30);
    worst_log_exp = std::max(worst_log_exp, (s2::log_map(n, s2::exp_map(n, eta)) - eta).norm());
  }
  CHECK(used > 99000);
  CHECK(worst_len < 1e-12);
  CHECK(worst_exp_log < 1e-9);
  CHECK(worst_log_exp < 1e-9);
}

TEST_CASE("log map stays tangent and points along the geodesic") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = dtv::testing::random_unit(rng);
    const Vec3 m = dtv::testing::random_unit(rng);
    if (n.dot(m) < -0.999) continue;
    const Vec3 xi = s2::log_map(n, m);
    CHECK(std::abs(xi.dot(n)) < 1e-12);
    // antisymmetry through transport: log_m(n) = -P_{n->m} log_n(m)
    const Vec3 back = s2::parallel_transport(n, m, xi);
    CHECK((back + s2::log_map(m, n)).norm() < 1e-10);
  }
}

TEST_CASE("parallel transport is a tangent-space isometry") {
  std::mt19937_64 rng(11);
  double worst_forms = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 n = dtv::testing::random_unit(rng);
    const Vec3 m = dtv::testing::random_unit(rng);
    if (n.dot(m) < -1.0 + 1e-6) continue;
    const Vec3 xi = dtv::testing::random_tangent(rng, n, 2.0);
    const Vec3 eta = dtv::testing::random_tangent(rng, n, 2.0);

    const Vec3 txi = s2::parallel_transport(n, m, xi);
    const Vec3 teta = s2::parallel_transport(n, m, eta);
    CHECK(std::abs(txi.dot(m)) < 1e-10);                  // lands in T_m
    CHECK(std::abs(txi.norm() - xi.norm()) < 1e-10);      // isometric
    CHECK(std::abs(txi.dot(teta) - xi.dot(eta)) < 1e-9);  // preserves the metric

    // round trip back to T_n
    CHECK((s2::parallel_transport(m, n, txi) - xi).norm() < 1e-9);

    worst_forms = std::max(worst_forms, (txi - s2::parallel_transport_rotation(n, m, xi)).norm());
  }
  CHECK(worst_forms < 1e-9);
}

TEST_CASE("transport along a quarter circle rotates the frame") {
  // Moving e1 -> e2 takes the tangent e2 to -e1 and leaves e3 fixed.
  CHECK((s2::parallel_transport(e1, e2, e2) + e1).norm() < 1e-15);
  CHECK((s2::parallel_transport(e1, e2, e3) - e3).norm() < 1e-15);
}

TEST_CASE("near-antipodal pairs throw with context") {
  const Vec3 m = -e1 + 1e-12 * e2;
  try {
    (void)s2::log_map(e1, m.normalized(), "unit-test");
    FAIL("expected AntipodalError");
  } catch (const s2::AntipodalError& err) {
    CHECK(std::string(err.what()).find("unit-test") != std::string::npos);
  }
}
