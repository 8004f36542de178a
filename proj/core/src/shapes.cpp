#include "dtv/shapes.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>

namespace dtv::shapes {

namespace {

// Welds grid points shared between faces via exact integer keys.
struct VertexWelder {
  std::map<std::array<std::int64_t, 3>, int> index;
  std::vector<Vec3> positions;

  int add(const std::array<std::int64_t, 3>& key, const Vec3& pos) {
    auto [it, inserted] = index.emplace(key, static_cast<int>(positions.size()));
    if (inserted) positions.push_back(pos);
    return it->second;
  }
};

}  // namespace

SurfaceMesh cube_crossed_diagonals() {
  SurfaceMesh mesh;
  const double h = 0.5;
  for (int sz = -1; sz <= 1; sz += 2)
    for (int sy = -1; sy <= 1; sy += 2)
      for (int sx = -1; sx <= 1; sx += 2)
        mesh.vertices.push_back(Vec3(sx * h, sy * h, sz * h));
  // corner index from sign bits: x + 2y + 4z with s -> (s+1)/2
  auto corner = [](int x, int y, int z) { return x + 2 * y + 4 * z; };
  struct Face {
    std::array<int, 4> loop;  // counterclockwise seen from outside
  };
  const Face faces[6] = {
      {{corner(0, 0, 0), corner(0, 1, 0), corner(1, 1, 0), corner(1, 0, 0)}},  // z-
      {{corner(0, 0, 1), corner(1, 0, 1), corner(1, 1, 1), corner(0, 1, 1)}},  // z+
      {{corner(0, 0, 0), corner(1, 0, 0), corner(1, 0, 1), corner(0, 0, 1)}},  // y-
      {{corner(0, 1, 0), corner(0, 1, 1), corner(1, 1, 1), corner(1, 1, 0)}},  // y+
      {{corner(0, 0, 0), corner(0, 0, 1), corner(0, 1, 1), corner(0, 1, 0)}},  // x-
      {{corner(1, 0, 0), corner(1, 1, 0), corner(1, 1, 1), corner(1, 0, 1)}},  // x+
  };
  for (const Face& f : faces) {
    Vec3 center = Vec3::Zero();
    for (int v : f.loop) center += mesh.vertices[v];
    center /= 4.0;
    const int c = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(center);
    for (int k = 0; k < 4; ++k) {
      mesh.triangles.push_back({f.loop[k], f.loop[(k + 1) % 4], c});
    }
  }
  mesh.finalize();
  return mesh;
}

SurfaceMesh regular_tetrahedron(double area) {
  SurfaceMesh mesh;
  mesh.vertices = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  mesh.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  // current edge length 2*sqrt(2); target a with sqrt(3) a^2 = area
  const double target_edge = std::sqrt(area / std::sqrt(3.0));
  const double scale = target_edge / (2.0 * std::sqrt(2.0));
  for (Vec3& x : mesh.vertices) x *= scale;
  mesh.finalize();
  return mesh;
}

SurfaceMesh icosahedron(double area) {
  SurfaceMesh mesh;
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  mesh.vertices = {
      Vec3(-1, phi, 0), Vec3(1, phi, 0),   Vec3(-1, -phi, 0), Vec3(1, -phi, 0),
      Vec3(0, -1, phi), Vec3(0, 1, phi),   Vec3(0, -1, -phi), Vec3(0, 1, -phi),
      Vec3(phi, 0, -1), Vec3(phi, 0, 1),   Vec3(-phi, 0, -1), Vec3(-phi, 0, 1),
  };
  mesh.triangles = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  // current edge length 2; target a with 5*sqrt(3) a^2 = area
  const double target_edge = std::sqrt(area / (5.0 * std::sqrt(3.0)));
  for (Vec3& x : mesh.vertices) x *= target_edge / 2.0;
  mesh.finalize();
  return mesh;
}

SurfaceMesh icosphere(int subdivisions, double radius) {
  SurfaceMesh mesh = icosahedron(5.0 * std::sqrt(3.0) * 4.0);  // edge length 2
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.emplace(key, static_cast<int>(mesh.vertices.size()));
      if (inserted) mesh.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
      return it->second;
    };
    std::vector<std::array<int, 3>> refined;
    refined.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      refined.push_back({t[0], ab, ca});
      refined.push_back({t[1], bc, ab});
      refined.push_back({t[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(refined);
  }
  for (Vec3& x : mesh.vertices) x *= radius / x.norm();
  mesh.finalize();
  return mesh;
}

SurfaceMesh box(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz) {
  VertexWelder weld;
  SurfaceMesh mesh;
  const std::array<int, 3> div{nx, ny, nz};
  // One face per (axis, side). Grid key is the integer lattice position on
  // the box surface; shared edge/corner nodes weld exactly.
  for (int axis = 0; axis < 3; ++axis) {
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    for (int side = 0; side <= 1; ++side) {
      const int nu = div[u_axis];
      const int nv = div[v_axis];
      std::vector<int> grid((nu + 1) * (nv + 1));
      for (int j = 0; j <= nv; ++j) {
        for (int i = 0; i <= nu; ++i) {
          std::array<std::int64_t, 3> key{};
          key[axis] = side == 0 ? 0 : div[axis];
          key[u_axis] = i;
          key[v_axis] = j;
          Vec3 pos;
          pos[axis] = side == 0 ? lo[axis] : hi[axis];
          pos[u_axis] = lo[u_axis] + (hi[u_axis] - lo[u_axis]) * i / nu;
          pos[v_axis] = lo[v_axis] + (hi[v_axis] - lo[v_axis]) * j / nv;
          grid[j * (nu + 1) + i] = weld.add(key, pos);
        }
      }
      for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
          const int p00 = grid[j * (nu + 1) + i];
          const int p10 = grid[j * (nu + 1) + i + 1];
          const int p01 = grid[(j + 1) * (nu + 1) + i];
          const int p11 = grid[(j + 1) * (nu + 1) + i + 1];
          if (side == 1) {
            // u x v points along +axis = outward
            mesh.triangles.push_back({p00, p10, p11});
            mesh.triangles.push_back({p00, p11, p01});
          } else {
            mesh.triangles.push_back({p00, p11, p10});
            mesh.triangles.push_back({p00, p01, p11});
          }
        }
      }
    }
  }
  mesh.vertices = std::move(weld.positions);
  mesh.finalize();
  return mesh;
}

SurfaceMesh project_to_sphere(const SurfaceMesh& mesh, double radius) {
  std::vector<Vec3> projected = mesh.vertices;
  for (Vec3& x : projected) x *= radius / x.norm();
  return mesh.with_vertices(projected);
}

namespace {

// Radial extrusion of a closed parameter surface into a tet shell: layer 0
// sits at `inner`, layer `layers` at `outer`, intermediate layers interpolate
// linearly. Prisms are split into 3 tets with quad diagonals anchored at the
// smaller surface index, which matches across neighboring prisms. The inner
// boundary is tagged 1, the outer 2, both oriented out of the volume.
TetMesh extrude_prism_shell(const SurfaceMesh& param, const std::vector<Vec3>& inner,
                            const std::vector<Vec3>& outer, int layers) {
  const int n_surface = param.n_vertices();
  TetMesh mesh;
  mesh.vertices.resize(static_cast<std::size_t>(n_surface) * (layers + 1));
  for (int s = 0; s < n_surface; ++s) {
    for (int j = 0; j <= layers; ++j) {
      const double t = static_cast<double>(j) / layers;
      mesh.vertices[static_cast<std::size_t>(j) * n_surface + s] =
          (1.0 - t) * inner[s] + t * outer[s];
    }
  }

  auto node = [n_surface](int layer, int s) { return layer * n_surface + s; };

  for (int j = 0; j < layers; ++j) {
    for (const auto& tri : param.triangles) {
      std::array<int, 3> s{tri[0], tri[1], tri[2]};
      // rotate so s[0] is the smallest surface index
      while (!(s[0] < s[1] && s[0] < s[2])) {
        std::array<int, 3> r{s[1], s[2], s[0]};
        s = r;
      }
      const int v0 = node(j, s[0]), v1 = node(j, s[1]), v2 = node(j, s[2]);
      const int v3 = node(j + 1, s[0]), v4 = node(j + 1, s[1]), v5 = node(j + 1, s[2]);
      if (s[1] < s[2]) {
        mesh.tets.push_back({v0, v1, v2, v5});
        mesh.tets.push_back({v0, v1, v5, v4});
        mesh.tets.push_back({v0, v4, v5, v3});
      } else {
        mesh.tets.push_back({v0, v1, v2, v4});
        mesh.tets.push_back({v0, v4, v2, v5});
        mesh.tets.push_back({v0, v4, v5, v3});
      }
    }
  }

  for (const auto& tri : param.triangles) {
    mesh.boundary_triangles.push_back({node(0, tri[0]), node(0, tri[2]), node(0, tri[1])});
    mesh.boundary_tags.push_back(1);
    mesh.boundary_triangles.push_back(
        {node(layers, tri[0]), node(layers, tri[1]), node(layers, tri[2])});
    mesh.boundary_tags.push_back(2);
  }

  mesh.validate();
  return mesh;
}

}  // namespace

TetMesh icosphere_shell_tet_mesh(double inner_radius, int subdivisions, int layers) {
  const SurfaceMesh param = icosphere(subdivisions, 1.0);
  std::vector<Vec3> inner(param.vertices.size()), outer(param.vertices.size());
  for (std::size_t s = 0; s < param.vertices.size(); ++s) {
    const Vec3 dir = param.vertices[s].normalized();
    inner[s] = inner_radius * dir;
    outer[s] = dir;
  }
  return extrude_prism_shell(param, inner, outer, layers);
}

TetMesh shell_tet_mesh(InnerBoundary kind, double inner_size, int n, int layers) {
  // Cube-sphere parameterization: a triangulated cube surface with n cells
  // per face edge provides the shared connectivity of all radial layers.
  VertexWelder weld;
  std::vector<std::array<std::int64_t, 3>> surface_keys;
  SurfaceMesh param;  // unit-cube surface, outward oriented
  {
    const std::array<int, 3> div{n, n, n};
    for (int axis = 0; axis < 3; ++axis) {
      const int u_axis = (axis + 1) % 3;
      const int v_axis = (axis + 2) % 3;
      for (int side = 0; side <= 1; ++side) {
        std::vector<int> grid((n + 1) * (n + 1));
        for (int j = 0; j <= n; ++j) {
          for (int i = 0; i <= n; ++i) {
            std::array<std::int64_t, 3> key{};
            key[axis] = side == 0 ? -div[axis] : div[axis];
            key[u_axis] = 2 * i - n;
            key[v_axis] = 2 * j - n;
            Vec3 pos(static_cast<double>(key[0]) / n, static_cast<double>(key[1]) / n,
                     static_cast<double>(key[2]) / n);
            // Deterministic in-face jitter of the interior nodes breaks the
            // coplanarity of neighboring parameter cells; without it every
            // quad diagonal of a sphere discretized through this map is a
            // spuriously flat edge. Face-edge nodes stay put so the cube
            // edges and the welded connectivity are unchanged.
            if (i > 0 && i < n && j > 0 && j < n) {
              auto mix = [](std::uint64_t h) {
                h += 0x9e3779b97f4a7c15ull;
                h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
                h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
                return h ^ (h >> 31);
              };
              const std::uint64_t base = (static_cast<std::uint64_t>(axis * 2 + side) << 40) |
                                         (static_cast<std::uint64_t>(i) << 20) |
                                         static_cast<std::uint64_t>(j);
              auto uniform = [&](std::uint64_t salt) {
                return static_cast<double>(mix(base + salt) >> 11) /
                           static_cast<double>(1ull << 52) -
                       0.5;  // in [-0.5, 0.5)
              };
              const double cell = 2.0 / n;
              pos[u_axis] += 0.15 * cell * uniform(0);
              pos[v_axis] += 0.15 * cell * uniform(1);
            }
            const int idx = weld.add(key, pos);
            if (idx == static_cast<int>(surface_keys.size())) surface_keys.push_back(key);
            grid[j * (n + 1) + i] = idx;
          }
        }
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < n; ++i) {
            const int p00 = grid[j * (n + 1) + i];
            const int p10 = grid[j * (n + 1) + i + 1];
            const int p01 = grid[(j + 1) * (n + 1) + i];
            const int p11 = grid[(j + 1) * (n + 1) + i + 1];
            if (side == 1) {
              param.triangles.push_back({p00, p10, p11});
              param.triangles.push_back({p00, p11, p01});
            } else {
              param.triangles.push_back({p00, p11, p10});
              param.triangles.push_back({p00, p01, p11});
            }
          }
        }
      }
    }
    param.vertices = std::move(weld.positions);
    param.finalize();
  }

  const int n_surface = param.n_vertices();
  std::vector<Vec3> inner_pos(n_surface), outer_pos(n_surface);
  for (int s = 0; s < n_surface; ++s) {
    const Vec3& c = param.vertices[s];          // on the unit-cube surface
    const Vec3 outer = c.normalized();          // on the unit sphere
    Vec3 inner;
    if (kind == InnerBoundary::Cube) {
      inner = inner_size * c;                   // |c|_inf == 1 on the surface
    } else {
      // Deterministic radial ripple so the inner sphere's quads are genuinely
      // non-planar: a latitude/longitude-aligned grid on a sphere keeps every
      // quad diagonal at a near-zero dihedral angle, an artifact a smooth
      // surface of this resolution should not exhibit. The amplitude is ~1%
      // of the radius and fades linearly toward the outer boundary through
      // the radial interpolation below.
      auto mix = [](std::uint64_t h) {
        h += 0x9e3779b97f4a7c15ull;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
        return h ^ (h >> 31);
      };
      std::uint64_t h = 0x5eed;
      for (const std::int64_t k : surface_keys[s]) {
        h = mix(h ^ static_cast<std::uint64_t>(k + (1ll << 32)));
      }
      const double magnitude =
          0.75 + 0.5 * static_cast<double>(h >> 11) / static_cast<double>(1ull << 52);
      // Checkerboard sign over the parameter grid: every quad then pairs two
      // raised with two lowered corners, so no diagonal stays coplanar.
      const auto& key = surface_keys[s];
      int axis_idx = 0;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(key[a]) == n) axis_idx = a;
      }
      const std::int64_t iu = (key[(axis_idx + 1) % 3] + n) / 2;
      const std::int64_t iv = (key[(axis_idx + 2) % 3] + n) / 2;
      const double sign = ((iu + iv) & 1) ? 1.0 : -1.0;
      inner = inner_size * (1.0 + 0.012 * sign * magnitude) * outer;
    }
    inner_pos[s] = inner;
    outer_pos[s] = outer;
  }

  return extrude_prism_shell(param, inner_pos, outer_pos, layers);
}

}  // namespace dtv::shapes
