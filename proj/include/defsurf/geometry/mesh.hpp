#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "defsurf/common.hpp"

namespace defsurf::geom {

// Triangle or quad face, stored as up to four vertex indices.
struct Face {
  std::array<int, 4> v{-1, -1, -1, -1};
  int size = 0;

  static Face tri(int a, int b, int c) { return Face{{a, b, c, -1}, 3}; }
  static Face quad(int a, int b, int c, int d) { return Face{{a, b, c, d}, 4}; }
  int operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

// Incident faces of an edge (i, j) with i < j. `left` traverses the edge in
// (i -> j) order, `right` in (j -> i) order; -1 when absent (open mesh).
struct EdgeFaces {
  int left = -1;
  int right = -1;
};

// Indexed surface mesh, immutable after construction. Adjacency (unique
// edges and their incident faces) is built eagerly; construction throws
// ArgumentError for out-of-range or repeated face indices and TopologyError
// when more than two faces share an edge.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  Index vertex_count() const { return static_cast<Index>(vertices_.size()); }
  Index face_count() const { return static_cast<Index>(faces_.size()); }
  Index edge_count() const { return static_cast<Index>(edges_.size()); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  // Unique edges as (i, j) with i < j, sorted lexicographically.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<EdgeFaces>& edge_faces() const { return edge_faces_; }

  bool is_triangular() const { return all_tri_; }
  // Every edge has exactly two incident faces.
  bool is_closed() const { return closed_; }
  // Each shared edge is traversed in opposite directions by its two faces.
  bool is_consistently_oriented() const { return oriented_; }
  long euler_characteristic() const {
    return static_cast<long>(vertex_count() - edge_count() + face_count());
  }

  // Throws TopologyError unless closed, consistently oriented, triangular.
  void require_closed_tri(const char* operation) const;

  // Stable identity over vertex bytes and face indices.
  std::uint64_t content_hash() const;

  // Vertex positions as an N x 3 matrix.
  Mat vertex_matrix() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<EdgeFaces> edge_faces_;
  bool all_tri_ = true;
  bool closed_ = false;
  bool oriented_ = false;
  bool oriented_flag_failure_ = false;
};

// Unit normals per face; zero-area faces get a zero normal (callers exclude
// them from losses instead of erroring).
std::vector<Vec3> face_normals(const Mesh& mesh);

// Area-weighted unit vertex normals; vertices with a degenerate one-ring sum
// get a zero normal.
std::vector<Vec3> vertex_normals(const Mesh& mesh);

double total_surface_area(const Mesh& mesh);

}  // namespace defsurf::geom
