#pragma once

#include "defsurf/geometry/mesh.hpp"

namespace defsurf::geom {

// Triangle inradius/circumradius quality. normalized_icr = 2r/R is 1 for an
// equilateral triangle and 0 for a degenerate one.
struct TriangleQuality {
  Real inradius = 0;
  Real circumradius = 0;
  Real normalized_icr = 0;
};

TriangleQuality triangle_icr(const Vec3& p0, const Vec3& p1, const Vec3& p2);

// Per-face normalized ICR of a triangle mesh (quads are skipped).
std::vector<Real> mesh_icr(const Mesh& mesh);

// Summary used by the extraction report: average plus the fraction of faces
// below the 0.10 / 0.25 / 0.90 quality thresholds (percent).
struct IcrStats {
  double average = 0;
  double pct_below_010 = 0;
  double pct_below_025 = 0;
  double pct_below_090 = 0;
  long face_count = 0;
};

IcrStats icr_stats(const Mesh& mesh);

}  // namespace defsurf::geom
