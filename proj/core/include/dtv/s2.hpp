#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

// Riemannian operations on the unit sphere S^2 embedded in R^3, with the
// metric pulled back from the ambient Euclidean one. Points are unit
// 3-vectors; tangent vectors at n live in the plane orthogonal to n.

namespace dtv::s2 {

using Vec3 = Eigen::Vector3d;

inline constexpr double kAntipodalEps = 1e-10;
inline constexpr double kExpEps = 1e-14;

struct AntipodalError : std::runtime_error {
  explicit AntipodalError(const std::string& context)
      : std::runtime_error("antipodal sphere points: " + context) {}
};

inline double clamp_unit(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }

/// Geodesic distance d(n, m) = arccos(n.m), in [0, pi].
inline double geodesic_distance(const Vec3& n, const Vec3& m) {
  return std::acos(clamp_unit(n.dot(m)));
}

/// Exponential map at base along xi; xi must be tangent at base.
inline Vec3 exp_map(const Vec3& base, const Vec3& xi) {
  const double t = xi.norm();
  if (t < kExpEps) return base;
  return std::cos(t) * base + (std::sin(t) / t) * xi;
}

/// Logarithmic map: the tangent vector at n whose geodesic reaches m at unit
/// time. Undefined for antipodal pairs.
inline Vec3 log_map(const Vec3& n, const Vec3& m, const char* context = "log_map") {
  const double c = clamp_unit(n.dot(m));
  if (c < -1.0 + kAntipodalEps) throw AntipodalError(context);
  const Vec3 w = m - c * n;
  const double wn = w.norm();
  if (wn < kExpEps) return Vec3::Zero();
  return (std::acos(c) / wn) * w;
}

/// Parallel transport of xi from T_n to T_m along the connecting geodesic.
inline Vec3 parallel_transport(const Vec3& n, const Vec3& m, const Vec3& xi,
                               const char* context = "parallel_transport") {
  const Vec3 log_nm = log_map(n, m, context);
  const double d2 = log_nm.squaredNorm();
  if (d2 < kExpEps * kExpEps) return xi;
  const Vec3 log_mn = log_map(m, n, context);
  return xi - (xi.dot(log_nm) / d2) * (log_nm + log_mn);
}

/// Rotation form of transport, kept as an independent cross-check.
inline Vec3 parallel_transport_rotation(const Vec3& n, const Vec3& m, const Vec3& xi) {
  const Vec3 v = log_map(n, m, "parallel_transport_rotation");
  const double t = v.norm();
  if (t < kExpEps) return xi;
  const Vec3 u = v / t;
  return xi + (std::cos(t) * u - u - std::sin(t) * n) * u.dot(xi);
}

}  // namespace dtv::s2
