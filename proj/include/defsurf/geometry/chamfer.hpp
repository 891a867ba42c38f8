#pragma once

#include <vector>

#include "defsurf/geometry/mesh.hpp"

namespace defsurf::geom {

// Static kd-tree over 3D points for nearest-neighbor queries.
class KdTree3 {
 public:
  explicit KdTree3(const Mat& points);  // N x 3, N >= 1

  struct Nearest {
    int index = -1;
    Real distance = 0;
  };
  Nearest nearest(const Vec3& query) const;

  Index size() const { return points_.rows(); }

 private:
  struct NodeRange {
    int begin, end;  // range into order_
    int axis;
  };
  void build(int begin, int end, int depth);
  void query(int begin, int end, int depth, const Vec3& q, Nearest& best) const;

  Mat points_;
  std::vector<int> order_;  // permutation arranged as an implicit kd-tree
};

// Symmetric Chamfer-L1: 0.5 * (mean_p min_q |p-q| + mean_q min_p |q-p|).
// Throws ArgumentError when either set is empty.
Real chamfer_l1(const Mat& points_p, const Mat& points_q);

// Uniform-by-area surface samples from a mesh (triangles; quads are split
// into two triangles). Deterministic for a fixed seed.
Mat sample_surface_points(const Mesh& mesh, Index count, std::uint64_t seed);

}  // namespace defsurf::geom
