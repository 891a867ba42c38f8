#include "defsurf/geometry/quality.hpp"

#include <cmath>
#include <limits>

namespace defsurf::geom {

TriangleQuality triangle_icr(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  const Real a = (p1 - p2).norm();
  const Real b = (p2 - p0).norm();
  const Real c = (p0 - p1).norm();
  const Real area = Real(0.5) * (p1 - p0).cross(p2 - p0).norm();
  TriangleQuality q;
  if (!(area > Real(0))) {
    q.inradius = 0;
    q.circumradius = std::numeric_limits<Real>::infinity();
    q.normalized_icr = 0;
    return q;
  }
  const Real s = Real(0.5) * (a + b + c);
  q.inradius = area / s;
  q.circumradius = a * b * c / (Real(4) * area);
  q.normalized_icr = Real(2) * q.inradius / q.circumradius;
  return q;
}

std::vector<Real> mesh_icr(const Mesh& mesh) {
  std::vector<Real> out;
  out.reserve(static_cast<std::size_t>(mesh.face_count()));
  const auto& verts = mesh.vertices();
  for (const Face& f : mesh.faces()) {
    if (f.size != 3) continue;
    out.push_back(
        triangle_icr(verts[f[0]], verts[f[1]], verts[f[2]]).normalized_icr);
  }
  return out;
}

IcrStats icr_stats(const Mesh& mesh) {
  const std::vector<Real> values = mesh_icr(mesh);
  IcrStats stats;
  stats.face_count = static_cast<long>(values.size());
  if (values.empty()) return stats;
  double sum = 0;
  long below10 = 0, below25 = 0, below90 = 0;
  for (Real v : values) {
    sum += static_cast<double>(v);
    if (v < Real(0.10)) ++below10;
    if (v < Real(0.25)) ++below25;
    if (v < Real(0.90)) ++below90;
  }
  const double n = static_cast<double>(values.size());
  stats.average = sum / n;
  stats.pct_below_010 = 100.0 * static_cast<double>(below10) / n;
  stats.pct_below_025 = 100.0 * static_cast<double>(below25) / n;
  stats.pct_below_090 = 100.0 * static_cast<double>(below90) / n;
  return stats;
}

}  // namespace defsurf::geom
