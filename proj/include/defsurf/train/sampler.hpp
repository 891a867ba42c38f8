#pragma once

#include <vector>

#include "defsurf/render/image.hpp"
#include "defsurf/render/rasterizer.hpp"

namespace defsurf::train {

struct PixelSample {
  std::vector<int> pixels;  // linear indices, ascending
  bool used_union = false;  // empty intersection fallback engaged
  bool skipped = false;     // both masks empty
};

// Uniform sample (without replacement) of round(fraction * n) pixels from
// the intersection of the ground-truth mask and the predicted hard
// coverage; falls back to the union when the intersection is empty.
// Deterministic for a fixed engine state.
PixelSample sample_pixels(const render::ImageBuffer& gt_mask,
                          const render::RasterCoverage& coverage,
                          Real fraction, rng::Engine& engine);

}  // namespace defsurf::train
