#pragma once

#include <Eigen/SparseCore>

#include "defsurf/geometry/mesh.hpp"

namespace defsurf::spectral {

// Cotan stiffness matrix W (symmetric, rows summing to zero) and the lumped
// mixed-Voronoi mass vector (diagonal of A, strictly positive, summing to
// the total surface area).
struct LaplacianPair {
  Eigen::SparseMatrix<Real> stiffness;
  Vec mass;
};

// Requires a closed, consistently oriented triangle mesh. Zero-area faces
// contribute zero weight.
LaplacianPair cotan_laplacian(const geom::Mesh& mesh);

}  // namespace defsurf::spectral
