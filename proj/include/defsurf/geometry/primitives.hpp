#pragma once

#include "defsurf/geometry/mesh.hpp"

namespace defsurf::geom {

inline constexpr int kMaxIcosphereLevel = 8;

// Golden-ratio icosahedron normalized to the unit sphere. Vertex and face
// ordering is fixed so meshes (and the eigenfunction caches keyed by their
// hashes) are identical across runs.
Mesh icosahedron();

// Icosahedron subdivided `level` times with re-projection to the unit
// sphere: V = 10 * 4^level + 2, F = 20 * 4^level.
Mesh icosphere(int level);

// Loop-style 1-to-4 split without smoothing. New vertices are edge
// midpoints appended after the originals (V' = V + E, F' = 4F); with
// `project_to_sphere`, all vertices are normalized to unit length.
Mesh subdivide(const Mesh& mesh, bool project_to_sphere);

// Cubed-sphere quad mesh with an n x n grid per cube face, projected to the
// unit sphere: V = 6n^2 + 2, F = 6n^2.
Mesh quad_sphere(int n);

}  // namespace defsurf::geom
