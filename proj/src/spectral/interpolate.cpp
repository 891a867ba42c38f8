#include "defsurf/spectral/interpolate.hpp"

#include <cmath>

namespace defsurf::spectral {

namespace {

void clamp_and_normalize(Vec3& bary) {
  // Snap coordinates within round-off of 0 so queries at mesh vertices and
  // on edges evaluate without interpolation noise from the other corners.
  for (int i = 0; i < 3; ++i) {
    if (bary[i] < Real(1e-12)) bary[i] = Real(0);
    if (bary[i] > Real(1) - Real(1e-12)) bary[i] = Real(1);
  }
  const Real sum = bary.sum();
  if (sum > Real(0) && sum != Real(1)) bary /= sum;
}

}  // namespace

SurfacePointLocator::SurfacePointLocator(const geom::Mesh& mesh)
    : mesh_(std::make_shared<geom::Mesh>(mesh)) {
  mesh_->require_closed_tri("SurfacePointLocator");
  const auto& verts = mesh_->vertices();
  centers_.reserve(static_cast<std::size_t>(mesh_->face_count()));
  cos_radius_.reserve(centers_.capacity());
  for (const geom::Face& f : mesh_->faces()) {
    const Vec3 center =
        ((verts[f[0]] + verts[f[1]] + verts[f[2]]) / Real(3)).normalized();
    Real min_dot = Real(1);
    for (int i = 0; i < 3; ++i)
      min_dot = std::min(min_dot, center.dot(verts[f[i]].normalized()));
    centers_.push_back(center);
    // Angular prune margin: a query inside the face is within the corner
    // angle of the center; widen slightly for the fallback search.
    const Real angle = std::acos(std::clamp(min_dot, Real(-1), Real(1)));
    cos_radius_.push_back(std::cos(std::min(angle * Real(1.5) + Real(1e-3),
                                            Real(3.14159))));
  }
}

SurfacePointLocator::Hit SurfacePointLocator::locate(
    const Vec3& unit_point) const {
  const auto& verts = mesh_->vertices();
  const auto& faces = mesh_->faces();
  constexpr Real kInsideTol = Real(-1e-10);

  Hit best;
  Real best_min_bary = -std::numeric_limits<Real>::infinity();

  auto consider = [&](std::size_t f) -> bool {
    const geom::Face& face = faces[f];
    const Vec3& a = verts[face[0]];
    const Vec3& b = verts[face[1]];
    const Vec3& c = verts[face[2]];
    const Vec3 normal = (b - a).cross(c - a);
    const Real denom = normal.dot(unit_point);
    if (!(std::abs(denom) > Real(1e-14))) return false;  // grazing ray
    const Real t = normal.dot(a) / denom;
    if (!(t > Real(0))) return false;  // plane behind the origin ray
    const Vec3 p = t * unit_point;

    // Barycentrics from signed sub-areas against the face normal.
    const Real inv_area2 = Real(1) / normal.squaredNorm();
    Vec3 bary;
    bary[0] = (b - p).cross(c - p).dot(normal) * inv_area2;
    bary[1] = (c - p).cross(a - p).dot(normal) * inv_area2;
    bary[2] = Real(1) - bary[0] - bary[1];

    const Real min_bary = bary.minCoeff();
    if (min_bary > best_min_bary) {
      best_min_bary = min_bary;
      best.face = static_cast<int>(f);
      best.barycentric = bary;
    }
    return min_bary >= kInsideTol;
  };

  // Pruned pass; widen to a full scan only if nothing contains the point.
  for (std::size_t f = 0; f < centers_.size(); ++f) {
    if (unit_point.dot(centers_[f]) < cos_radius_[f]) continue;
    if (consider(f)) {
      best.fallback = false;
      clamp_and_normalize(best.barycentric);
      return best;
    }
  }
  for (std::size_t f = 0; f < centers_.size(); ++f)
    if (consider(f)) {
      best.fallback = false;
      clamp_and_normalize(best.barycentric);
      return best;
    }

  if (best.face < 0)
    throw NumericError("SurfacePointLocator: query could not be located");
  best.fallback = true;
  ++fallback_count_;
  clamp_and_normalize(best.barycentric);
  return best;
}

Mat interpolate_to_points(const SpectralBasis& basis,
                          const SurfacePointLocator& locator,
                          const Mat& points) {
  if (points.cols() != 3)
    throw ArgumentError("interpolate_to_points: points must be N x 3");
  if (basis.mesh_hash != locator.mesh().content_hash())
    throw ConfigError(
        "interpolate_to_points: basis is not bound to the locator mesh");
  if (basis.vertex_count() != locator.mesh().vertex_count())
    throw ConfigError("interpolate_to_points: basis/mesh size mismatch");

  Mat out(points.rows(), basis.count());
  const auto& faces = locator.mesh().faces();
  for (Index i = 0; i < points.rows(); ++i) {
    const Vec3 p = points.row(i).transpose();
    const Real norm = p.norm();
    if (std::abs(norm - Real(1)) > Real(1e-6))
      throw ArgumentError("interpolate_to_points: point " + std::to_string(i) +
                          " is not unit length");
    const auto hit = locator.locate(p / norm);
    const geom::Face& face = faces[static_cast<std::size_t>(hit.face)];
    out.row(i) = hit.barycentric[0] * basis.eigenfunctions.row(face[0]) +
                 hit.barycentric[1] * basis.eigenfunctions.row(face[1]) +
                 hit.barycentric[2] * basis.eigenfunctions.row(face[2]);
  }
  return out;
}

}  // namespace defsurf::spectral
