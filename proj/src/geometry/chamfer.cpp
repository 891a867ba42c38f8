#include "defsurf/geometry/chamfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace defsurf::geom {

KdTree3::KdTree3(const Mat& points) : points_(points) {
  if (points_.rows() < 1 || points_.cols() != 3)
    throw ArgumentError("KdTree3: need an N x 3 point matrix with N >= 1");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  build(0, static_cast<int>(points_.rows()), 0);
}

void KdTree3::build(int begin, int end, int depth) {
  if (end - begin <= 1) return;
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     if (points_(a, axis) != points_(b, axis))
                       return points_(a, axis) < points_(b, axis);
                     return a < b;  // deterministic tie-break
                   });
  build(begin, mid, depth + 1);
  build(mid + 1, end, depth + 1);
}

void KdTree3::query(int begin, int end, int depth, const Vec3& q,
                    Nearest& best) const {
  if (end <= begin) return;
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  const int idx = order_[static_cast<std::size_t>(mid)];
  const Real d = (points_.row(idx).transpose() - q).norm();
  if (d < best.distance || best.index < 0) {
    best.distance = d;
    best.index = idx;
  }
  const Real delta = q[axis] - points_(idx, axis);
  const int near_begin = delta < 0 ? begin : mid + 1;
  const int near_end = delta < 0 ? mid : end;
  const int far_begin = delta < 0 ? mid + 1 : begin;
  const int far_end = delta < 0 ? end : mid;
  query(near_begin, near_end, depth + 1, q, best);
  if (std::abs(delta) < best.distance)
    query(far_begin, far_end, depth + 1, q, best);
}

KdTree3::Nearest KdTree3::nearest(const Vec3& q) const {
  Nearest best;
  best.distance = std::numeric_limits<Real>::infinity();
  query(0, static_cast<int>(points_.rows()), 0, q, best);
  return best;
}

namespace {

Real one_sided_mean(const Mat& from, const KdTree3& to) {
  Real sum = 0;
  for (Index i = 0; i < from.rows(); ++i)
    sum += to.nearest(from.row(i).transpose()).distance;
  return sum / static_cast<Real>(from.rows());
}

}  // namespace

Real chamfer_l1(const Mat& points_p, const Mat& points_q) {
  if (points_p.rows() == 0 || points_q.rows() == 0)
    throw ArgumentError("chamfer_l1: point sets must be non-empty");
  const KdTree3 tree_p(points_p);
  const KdTree3 tree_q(points_q);
  return Real(0.5) *
         (one_sided_mean(points_p, tree_q) + one_sided_mean(points_q, tree_p));
}

Mat sample_surface_points(const Mesh& mesh, Index count, std::uint64_t seed) {
  if (count < 1) throw ArgumentError("sample_surface_points: count must be >= 1");
  // Collect triangles (split quads along the 0-2 diagonal).
  std::vector<std::array<int, 3>> tris;
  for (const Face& f : mesh.faces()) {
    tris.push_back({f[0], f[1], f[2]});
    if (f.size == 4) tris.push_back({f[0], f[2], f[3]});
  }
  if (tris.empty()) throw ArgumentError("sample_surface_points: empty mesh");

  const auto& verts = mesh.vertices();
  std::vector<double> cumulative(tris.size());
  double total = 0;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Vec3& a = verts[tris[t][0]];
    const Vec3& b = verts[tris[t][1]];
    const Vec3& c = verts[tris[t][2]];
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[t] = total;
  }
  if (!(total > 0))
    throw ArgumentError("sample_surface_points: mesh has zero area");

  rng::Engine engine(seed);
  Mat out(count, 3);
  for (Index i = 0; i < count; ++i) {
    const double pick = rng::uniform01(engine) * total;
    const auto it =
        std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = static_cast<std::size_t>(
        std::min(cumulative.size() - 1,
                 static_cast<std::size_t>(it - cumulative.begin())));
    Real u = static_cast<Real>(rng::uniform01(engine));
    Real v = static_cast<Real>(rng::uniform01(engine));
    if (u + v > Real(1)) {
      u = Real(1) - u;
      v = Real(1) - v;
    }
    const Vec3& a = verts[tris[t][0]];
    const Vec3& b = verts[tris[t][1]];
    const Vec3& c = verts[tris[t][2]];
    out.row(i) = (a + u * (b - a) + v * (c - a)).transpose();
  }
  return out;
}

}  // namespace defsurf::geom
