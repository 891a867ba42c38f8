#include "defsurf/spectral/laplacian.hpp"

#include <vector>

namespace defsurf::spectral {

LaplacianPair cotan_laplacian(const geom::Mesh& mesh) {
  mesh.require_closed_tri("cotan_laplacian");
  const Index n = mesh.vertex_count();
  const auto& verts = mesh.vertices();

  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.face_count()) * 12);
  Vec mass = Vec::Zero(n);

  for (const geom::Face& face : mesh.faces()) {
    const int i0 = face[0], i1 = face[1], i2 = face[2];
    const Vec3& p0 = verts[i0];
    const Vec3& p1 = verts[i1];
    const Vec3& p2 = verts[i2];
    const Real area2 = (p1 - p0).cross(p2 - p0).norm();  // 2 * area
    if (!(area2 > Real(0))) continue;                    // degenerate: no weight
    const Real area = Real(0.5) * area2;

    const int idx[3] = {i0, i1, i2};
    const Vec3 pts[3] = {p0, p1, p2};
    Real cot[3];    // cotangent of the angle at corner k
    Real sqlen[3];  // squared length of the edge opposite corner k
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = pts[(k + 1) % 3] - pts[k];
      const Vec3 v = pts[(k + 2) % 3] - pts[k];
      cot[k] = u.dot(v) / area2;  // |u x v| equals 2*area for every corner
      sqlen[k] = (pts[(k + 2) % 3] - pts[(k + 1) % 3]).squaredNorm();
    }

    for (int k = 0; k < 3; ++k) {
      const int i = idx[(k + 1) % 3];
      const int j = idx[(k + 2) % 3];
      const Real w = Real(0.5) * cot[k];
      triplets.emplace_back(i, j, -w);
      triplets.emplace_back(j, i, -w);
      triplets.emplace_back(i, i, w);
      triplets.emplace_back(j, j, w);
    }

    // Mixed Voronoi lumping: true Voronoi areas for non-obtuse triangles,
    // area/2 at the obtuse corner and area/4 at the others otherwise.
    const bool obtuse0 = cot[0] < Real(0);
    const bool obtuse1 = cot[1] < Real(0);
    const bool obtuse2 = cot[2] < Real(0);
    if (!obtuse0 && !obtuse1 && !obtuse2) {
      for (int k = 0; k < 3; ++k) {
        const Real a = sqlen[(k + 2) % 3] * cot[(k + 2) % 3] +
                       sqlen[(k + 1) % 3] * cot[(k + 1) % 3];
        mass[idx[k]] += a / Real(8);
      }
    } else {
      for (int k = 0; k < 3; ++k) {
        const bool is_obtuse = cot[k] < Real(0);
        mass[idx[k]] += is_obtuse ? area / Real(2) : area / Real(4);
      }
    }
  }

  LaplacianPair pair;
  pair.stiffness.resize(n, n);
  pair.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  pair.stiffness.makeCompressed();
  pair.mass = std::move(mass);
  for (Index i = 0; i < n; ++i)
    if (!(pair.mass[i] > Real(0)))
      throw NumericError("cotan_laplacian: non-positive mass at vertex " +
                         std::to_string(i));
  return pair;
}

}  // namespace defsurf::spectral
