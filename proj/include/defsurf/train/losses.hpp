#pragma once

#include "defsurf/geometry/mesh.hpp"
#include "defsurf/render/rasterizer.hpp"
#include "defsurf/render/shader.hpp"

namespace defsurf::train {

struct LossWeights {
  Real lambda_c = Real(1);
  Real lambda_m = Real(2);
  Real lambda_n = Real(0.01);
  Real lambda_g = Real(0.1);
  Real lambda_icr = Real(5e-3);
  bool icr_enabled = false;

  void validate() const;
};

// Mean over mesh edges of (1 - n_left . n_right)^2; edges touching a
// degenerate (zero-normal) face are excluded. The lambda_n weight is applied
// once, in the total.
ad::Tensor loss_normal(const ad::Tensor& face_normals, const geom::Mesh& mesh);

// Mean over faces of (1 - 2r/R); degenerate faces are excluded.
ad::Tensor loss_icr(const ad::Tensor& positions, const geom::Mesh& mesh);

// Mean per-pixel L1 over the full mask image; the soft-mask band carries the
// gradient, saturated pixels contribute constants.
ad::Tensor loss_mask(const render::ImageBuffer& gt_mask,
                     const render::SoftMask& soft);

// Mean over the sampled pixels (and channels) of |I - base| +
// lambda_g * |I - final|. `gt_covered` holds the ground-truth colors of the
// covered sampled pixels (aligned with the shade result rows);
// `uncovered_abs_sum` is the summed |I| over sampled pixels the prediction
// does not cover (those render black and contribute a constant).
ad::Tensor loss_photometric(const Mat& gt_covered, double uncovered_abs_sum,
                            Index total_sampled,
                            const render::ShadeResult& shaded, Real lambda_g);

}  // namespace defsurf::train
