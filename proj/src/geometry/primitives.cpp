#include "defsurf/geometry/primitives.hpp"

#include <cmath>
#include <map>
#include <string>

namespace defsurf::geom {

Mesh icosahedron() {
  const Real phi = (Real(1) + std::sqrt(Real(5))) / Real(2);
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (Vec3& v : verts) v.normalize();
  const int face_table[20][3] = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  std::vector<Face> faces;
  faces.reserve(20);
  for (const auto& f : face_table) faces.push_back(Face::tri(f[0], f[1], f[2]));
  return Mesh(std::move(verts), std::move(faces));
}

Mesh icosphere(int level) {
  if (level < 0) throw ArgumentError("icosphere: level must be >= 0");
  if (level > kMaxIcosphereLevel)
    throw CapacityError("icosphere: level " + std::to_string(level) +
                        " above cap " + std::to_string(kMaxIcosphereLevel));
  Mesh mesh = icosahedron();
  for (int i = 0; i < level; ++i) mesh = subdivide(mesh, true);
  return mesh;
}

Mesh subdivide(const Mesh& mesh, bool project_to_sphere) {
  mesh.require_closed_tri("subdivide");

  std::vector<Vec3> verts = mesh.vertices();
  verts.reserve(verts.size() + mesh.edges().size());
  // Midpoint vertex of edge e gets index V + e; edges() order is the
  // deterministic lexicographic one.
  std::map<std::array<int, 2>, int> edge_index;
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const auto& edge = mesh.edges()[e];
    edge_index[edge] = static_cast<int>(verts.size());
    verts.push_back((mesh.vertices()[edge[0]] + mesh.vertices()[edge[1]]) /
                    Real(2));
  }

  auto midpoint = [&](int a, int b) {
    return edge_index.at({std::min(a, b), std::max(a, b)});
  };

  std::vector<Face> faces;
  faces.reserve(mesh.faces().size() * 4);
  for (const Face& face : mesh.faces()) {
    const int a = face[0], b = face[1], c = face[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    faces.push_back(Face::tri(a, ab, ca));
    faces.push_back(Face::tri(b, bc, ab));
    faces.push_back(Face::tri(c, ca, bc));
    faces.push_back(Face::tri(ab, bc, ca));
  }

  if (project_to_sphere)
    for (Vec3& v : verts) {
      const Real len = v.norm();
      if (len > Real(0)) v /= len;
    }
  return Mesh(std::move(verts), std::move(faces));
}

Mesh quad_sphere(int n) {
  if (n < 1) throw ArgumentError("quad_sphere: n must be >= 1");

  // Integer lattice points on the surface of an n x n x n cube; keys
  // deduplicate shared edges and corners exactly.
  std::map<std::array<int, 3>, int> vertex_index;
  std::vector<Vec3> verts;
  auto vertex_at = [&](int i, int j, int k) {
    const std::array<int, 3> key{i, j, k};
    auto it = vertex_index.find(key);
    if (it != vertex_index.end()) return it->second;
    const int idx = static_cast<int>(verts.size());
    vertex_index.emplace(key, idx);
    Vec3 p(Real(-1) + Real(2) * Real(i) / Real(n),
           Real(-1) + Real(2) * Real(j) / Real(n),
           Real(-1) + Real(2) * Real(k) / Real(n));
    verts.push_back(p.normalized());
    return idx;
  };

  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(6) * n * n);
  // One lambda per cube face; lattice coordinates chosen so each quad winds
  // counter-clockwise seen from outside.
  auto emit_face = [&](auto&& point) {
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v) {
        const int p00 = std::apply(vertex_at, point(u, v));
        const int p10 = std::apply(vertex_at, point(u + 1, v));
        const int p11 = std::apply(vertex_at, point(u + 1, v + 1));
        const int p01 = std::apply(vertex_at, point(u, v + 1));
        faces.push_back(Face::quad(p00, p10, p11, p01));
      }
  };

  // +x: u->y, v->z ; -x: u->z, v->y (swapped to flip winding), etc.
  emit_face([&](int u, int v) { return std::array<int, 3>{n, u, v}; });
  emit_face([&](int u, int v) { return std::array<int, 3>{0, v, u}; });
  emit_face([&](int u, int v) { return std::array<int, 3>{v, n, u}; });
  emit_face([&](int u, int v) { return std::array<int, 3>{u, 0, v}; });
  emit_face([&](int u, int v) { return std::array<int, 3>{u, v, n}; });
  emit_face([&](int u, int v) { return std::array<int, 3>{v, u, 0}; });

  return Mesh(std::move(verts), std::move(faces));
}

}  // namespace defsurf::geom
