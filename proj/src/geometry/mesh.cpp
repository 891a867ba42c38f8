#include "defsurf/geometry/mesh.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace defsurf::geom {

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int vcount = static_cast<int>(vertices_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    if (face.size != 3 && face.size != 4)
      throw ArgumentError("face " + std::to_string(f) + " has invalid arity");
    if (face.size == 3) {
      // keep all_tri_ as-is
    } else {
      all_tri_ = false;
    }
    for (int i = 0; i < face.size; ++i) {
      if (face[i] < 0 || face[i] >= vcount)
        throw ArgumentError("face " + std::to_string(f) +
                            " references vertex " + std::to_string(face[i]) +
                            " out of range");
      for (int j = i + 1; j < face.size; ++j)
        if (face[i] == face[j])
          throw ArgumentError("face " + std::to_string(f) +
                              " repeats vertex " + std::to_string(face[i]));
    }
  }

  // Collect directed edges, then reduce to unique undirected edges in
  // lexicographic order so edge indices are deterministic.
  std::map<std::array<int, 2>, EdgeFaces> edge_map;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (int i = 0; i < face.size; ++i) {
      const int a = face[i];
      const int b = face[(i + 1) % face.size];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      EdgeFaces& ef = edge_map[key];
      const bool forward = (a == key[0]);
      int& slot = forward ? ef.left : ef.right;
      if (slot != -1) {
        if (forward ? ef.right != -1 : ef.left != -1)
          throw TopologyError("edge (" + std::to_string(key[0]) + "," +
                              std::to_string(key[1]) +
                              ") has more than two incident faces");
        // Two faces traverse the edge in the same direction: orientation is
        // inconsistent but the mesh is still two-manifold. Record and flag.
        int& other = forward ? ef.right : ef.left;
        other = static_cast<int>(f);
        oriented_flag_failure_ = true;
      } else {
        slot = static_cast<int>(f);
      }
    }
  }

  edges_.reserve(edge_map.size());
  edge_faces_.reserve(edge_map.size());
  closed_ = !faces_.empty();
  for (const auto& [key, ef] : edge_map) {
    edges_.push_back(key);
    edge_faces_.push_back(ef);
    if (ef.left == -1 || ef.right == -1) closed_ = false;
  }
  oriented_ = closed_ && !oriented_flag_failure_;
}

void Mesh::require_closed_tri(const char* operation) const {
  if (!all_tri_)
    throw TopologyError(std::string(operation) + ": mesh must be triangular");
  if (!closed_)
    throw TopologyError(std::string(operation) +
                        ": mesh must be closed (every edge with two faces)");
  if (!oriented_)
    throw TopologyError(std::string(operation) +
                        ": mesh must be consistently oriented");
}

std::uint64_t Mesh::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Vec3& v : vertices_) {
    const double coords[3] = {static_cast<double>(v.x()),
                              static_cast<double>(v.y()),
                              static_cast<double>(v.z())};
    h = fnv1a(coords, sizeof(coords), h);
  }
  for (const Face& f : faces_) {
    h = fnv1a(&f.size, sizeof(f.size), h);
    h = fnv1a(f.v.data(), sizeof(int) * static_cast<std::size_t>(f.size), h);
  }
  return h;
}

Mat Mesh::vertex_matrix() const {
  Mat m(vertex_count(), 3);
  for (Index i = 0; i < vertex_count(); ++i)
    m.row(i) = vertices_[static_cast<std::size_t>(i)].transpose();
  return m;
}

std::vector<Vec3> face_normals(const Mesh& mesh) {
  std::vector<Vec3> normals(static_cast<std::size_t>(mesh.face_count()),
                            Vec3::Zero());
  const auto& verts = mesh.vertices();
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Face& face = mesh.faces()[f];
    Vec3 n;
    if (face.size == 3) {
      n = (verts[face[1]] - verts[face[0]])
              .cross(verts[face[2]] - verts[face[0]]);
    } else {
      // Quad: cross of the diagonals handles mild non-planarity.
      n = (verts[face[2]] - verts[face[0]])
              .cross(verts[face[3]] - verts[face[1]]);
    }
    const Real len = n.norm();
    if (len > Real(0)) normals[f] = n / len;
  }
  return normals;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> accum(static_cast<std::size_t>(mesh.vertex_count()),
                          Vec3::Zero());
  const auto& verts = mesh.vertices();
  for (const Face& face : mesh.faces()) {
    if (face.size == 3) {
      const Vec3 n = (verts[face[1]] - verts[face[0]])
                         .cross(verts[face[2]] - verts[face[0]]);
      // |n| = 2 * area, so plain accumulation is area weighting.
      accum[face[0]] += n;
      accum[face[1]] += n;
      accum[face[2]] += n;
    } else {
      const Vec3 n = (verts[face[2]] - verts[face[0]])
                         .cross(verts[face[3]] - verts[face[1]]);
      for (int i = 0; i < 4; ++i) accum[face[i]] += n;
    }
  }
  for (Vec3& n : accum) {
    const Real len = n.norm();
    n = (len > Real(0)) ? Vec3(n / len) : Vec3::Zero();
  }
  return accum;
}

double total_surface_area(const Mesh& mesh) {
  double area = 0.0;
  const auto& verts = mesh.vertices();
  for (const Face& face : mesh.faces()) {
    if (face.size == 3) {
      area += 0.5 * (verts[face[1]] - verts[face[0]])
                        .cross(verts[face[2]] - verts[face[0]])
                        .norm();
    } else {
      area += 0.5 * (verts[face[1]] - verts[face[0]])
                        .cross(verts[face[2]] - verts[face[0]])
                        .norm();
      area += 0.5 * (verts[face[2]] - verts[face[0]])
                        .cross(verts[face[3]] - verts[face[0]])
                        .norm();
    }
  }
  return area;
}

}  // namespace defsurf::geom
