#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "defsurf/spectral/laplacian.hpp"

namespace defsurf::spectral {

// Lowest eigenpairs of W phi = lambda A phi on a domain mesh. Eigenvalues
// are nondecreasing, eigenfunctions A-orthonormal, and the sign of each
// column is fixed so its largest-magnitude entry is positive.
struct SpectralBasis {
  Vec eigenvalues;       // d
  Mat eigenfunctions;    // n x d, column i pairs with eigenvalues[i]
  std::uint64_t mesh_hash = 0;

  Index count() const { return eigenvalues.size(); }
  Index vertex_count() const { return eigenfunctions.rows(); }
};

// Dense route: symmetric reduction y = A^{1/2} phi followed by a dense
// symmetric eigendecomposition of A^{-1/2} W A^{-1/2}. O(n^3); intended for
// the basis mesh (a few thousand vertices).
SpectralBasis eigenbasis(const LaplacianPair& pair, Index d,
                         std::uint64_t mesh_hash);

// Iterative route for small d on large meshes: block inverse subspace
// iteration with Rayleigh-Ritz extraction. Same contract and sign
// convention as `eigenbasis`.
SpectralBasis eigenbasis_iterative(const LaplacianPair& pair, Index d,
                                   std::uint64_t mesh_hash,
                                   int max_iterations = 200,
                                   double tolerance = 1e-10);

// Band-selection policy: the first `low_count` eigenfunctions plus the
// contiguous band [high_begin, high_end).
struct EigenSelection {
  Index low_count = 0;
  Index high_begin = 0;
  Index high_end = 0;

  Index count() const { return low_count + (high_end - high_begin); }
  void validate(Index basis_count) const;
};

SpectralBasis select_eigenfunctions(const SpectralBasis& basis,
                                    const EigenSelection& policy);

// Binary cache: magic, version, mesh hash, d, vertex count header followed
// by a little-endian float64 payload. `load` returns nullopt when the file
// is absent or the header does not match the requested key.
void save_basis_cache(const std::filesystem::path& path,
                      const SpectralBasis& basis);
std::optional<SpectralBasis> load_basis_cache(
    const std::filesystem::path& path, std::uint64_t mesh_hash, Index d);

}  // namespace defsurf::spectral
