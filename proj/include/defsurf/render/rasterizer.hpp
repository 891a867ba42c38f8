#pragma once

#include <memory>
#include <vector>

#include "defsurf/ad/ops.hpp"
#include "defsurf/geometry/mesh.hpp"
#include "defsurf/render/camera.hpp"
#include "defsurf/render/image.hpp"

namespace defsurf::render {

// Hard z-buffered pixel-center coverage: the non-differentiable part of
// rasterization. Vertices at or behind the camera plane are flagged and
// their faces excluded.
struct RasterCoverage {
  int width = 0;
  int height = 0;
  std::vector<int> face_id;   // width*height, -1 = uncovered
  std::vector<int> covered;   // covered linear pixels (y*width+x), ascending
  long clipped_faces = 0;     // faces dropped because of invalid projections

  bool empty() const { return covered.empty(); }
  int face_at(int linear) const { return face_id[static_cast<std::size_t>(linear)]; }
  ImageBuffer hard_mask() const;
};

RasterCoverage rasterize_coverage(const Mat& positions, const geom::Mesh& mesh,
                                  const Camera& camera);

// Unit face normals as a tape op (degenerate faces yield zero rows).
ad::Tensor face_normal_tensor(const ad::Tensor& positions,
                              const geom::Mesh& mesh);
// Area-weighted unit vertex normals as a tape op.
ad::Tensor vertex_normal_tensor(const ad::Tensor& positions,
                                const geom::Mesh& mesh);

// Screen-space G-buffer over the covered pixels: perspective-correct
// interpolated positions, unit normals and features, differentiable with
// respect to vertex positions and attributes (barycentrics are functions of
// the vertex projections; the pixel->face assignment is fixed).
struct GBuffer {
  RasterCoverage coverage;
  Mat barycentric;       // M x 3 snapshot of the perspective-correct weights
  ad::Tensor position;   // M x 3
  ad::Tensor normal;     // M x 3, unit rows
  ad::Tensor feature;    // M x z_width

  Index covered_count() const { return static_cast<Index>(coverage.covered.size()); }
  // Scatter a per-covered-row tensor snapshot into a full image (uncovered
  // pixels are zero).
  ImageBuffer to_image(const Mat& rows_values) const;
};

struct RasterizeOptions {
  // Reuse a coverage computed elsewhere (e.g. for gradient checks with the
  // pixel->face assignment held fixed).
  const RasterCoverage* coverage = nullptr;
  // Precomputed vertex normal tensor; computed from positions when absent.
  const ad::Tensor* vertex_normals = nullptr;
};

GBuffer rasterize(const ad::Tensor& positions, const ad::Tensor& features,
                  const geom::Mesh& mesh, const Camera& camera,
                  const RasterizeOptions& options = {});

// Pixels within `band_px` (Chebyshev) of the hard coverage boundary, with
// per-pixel candidate silhouette faces. Pixels outside the band keep their
// saturated hard value.
struct SilhouetteBand {
  int width = 0;
  int height = 0;
  int band_px = 3;
  std::vector<int> band;  // linear pixel ids, ascending
  std::vector<int> candidate_offsets;  // band.size()+1 prefix offsets
  std::vector<int> candidate_faces;
  double fixed_sum = 0;   // sum of hard values over non-band pixels
  std::vector<std::uint8_t> in_band;    // width*height flags
  std::vector<std::uint8_t> fixed_one;  // non-band pixels saturated at 1
};

SilhouetteBand silhouette_band(const RasterCoverage& coverage,
                               const Mat& positions, const geom::Mesh& mesh,
                               const Camera& camera, int band_px = 3);

// Soft silhouette: per band pixel, max over candidate faces of
// sigmoid(sharpness * signed_screen_distance); differentiable w.r.t.
// vertex positions. Non-band pixels contribute their saturated hard value
// through `fixed_sum`.
struct SoftMask {
  ad::Tensor band_values;  // B x 1
  std::shared_ptr<const SilhouetteBand> band;
  Index total_pixels = 0;

  // Full mask image snapshot (band values + fixed region).
  ImageBuffer to_image() const;
};

SoftMask soft_mask(const ad::Tensor& positions, const geom::Mesh& mesh,
                   const Camera& camera, Real sharpness,
                   const SilhouetteBand& band);

}  // namespace defsurf::render
