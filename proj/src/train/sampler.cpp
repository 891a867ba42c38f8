#include "defsurf/train/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace defsurf::train {

PixelSample sample_pixels(const render::ImageBuffer& gt_mask,
                          const render::RasterCoverage& coverage,
                          Real fraction, rng::Engine& engine) {
  if (gt_mask.width != coverage.width || gt_mask.height != coverage.height)
    throw ArgumentError("sample_pixels: mask/coverage resolution mismatch");
  if (!(fraction > Real(0)) || fraction > Real(1))
    throw ArgumentError("sample_pixels: fraction must be in (0, 1]");

  PixelSample out;
  std::vector<int> pool;
  pool.reserve(gt_mask.pixel_count());
  for (std::size_t pix = 0; pix < gt_mask.pixel_count(); ++pix) {
    const bool in_gt = gt_mask.data[pix] > 0.5f;
    const bool in_pred = coverage.face_id[pix] >= 0;
    if (in_gt && in_pred) pool.push_back(static_cast<int>(pix));
  }
  if (pool.empty()) {
    for (std::size_t pix = 0; pix < gt_mask.pixel_count(); ++pix) {
      const bool in_gt = gt_mask.data[pix] > 0.5f;
      const bool in_pred = coverage.face_id[pix] >= 0;
      if (in_gt || in_pred) pool.push_back(static_cast<int>(pix));
    }
    out.used_union = true;
  }
  if (pool.empty()) {
    out.skipped = true;
    return out;
  }

  const std::size_t want = std::min(
      pool.size(),
      static_cast<std::size_t>(std::max<long long>(
          1, std::llround(static_cast<double>(fraction) *
                          static_cast<double>(pool.size())))));

  // Partial Fisher-Yates for a sample without replacement.
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng::uniform01(engine) *
                                     static_cast<double>(pool.size() - i));
    std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
  }
  out.pixels.assign(pool.begin(), pool.begin() + static_cast<long>(want));
  std::sort(out.pixels.begin(), out.pixels.end());
  return out;
}

}  // namespace defsurf::train
