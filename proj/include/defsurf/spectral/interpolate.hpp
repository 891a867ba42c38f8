#pragma once

#include <memory>
#include <vector>

#include "defsurf/spectral/eigenbasis.hpp"

namespace defsurf::spectral {

// Locates on-sphere query points in the faces of a sphere-domain triangle
// mesh: a point belongs to the face whose plane its central projection
// (ray from the origin) hits inside the planar triangle. Queries that land
// in a numerical gap fall back to the face with the best clamped
// barycentrics; fallbacks are counted so callers can log them.
class SurfacePointLocator {
 public:
  explicit SurfacePointLocator(const geom::Mesh& mesh);

  struct Hit {
    int face = -1;
    Vec3 barycentric = Vec3::Zero();
    bool fallback = false;
  };
  Hit locate(const Vec3& unit_point) const;

  const geom::Mesh& mesh() const { return *mesh_; }
  long fallback_count() const { return fallback_count_; }
  void reset_fallback_count() { fallback_count_ = 0; }

 private:
  std::shared_ptr<const geom::Mesh> mesh_;
  std::vector<Vec3> centers_;     // unit face-center directions
  std::vector<Real> cos_radius_;  // cosine of angular radius (with margin)
  mutable long fallback_count_ = 0;
};

// Piecewise-linear interpolation of eigenfunction rows to arbitrary
// on-sphere points (unit norm within 1e-6). The basis must have been
// computed on `locator.mesh()`.
Mat interpolate_to_points(const SpectralBasis& basis,
                          const SurfacePointLocator& locator,
                          const Mat& points);

}  // namespace defsurf::spectral
