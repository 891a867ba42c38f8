#include "defsurf/train/losses.hpp"

namespace defsurf::train {

void LossWeights::validate() const {
  const Real values[] = {lambda_c, lambda_m, lambda_n, lambda_g, lambda_icr};
  for (Real v : values)
    if (!std::isfinite(static_cast<double>(v)) || v < Real(0))
      throw ConfigError("LossWeights: weights must be finite and >= 0");
}

ad::Tensor loss_normal(const ad::Tensor& face_normals,
                       const geom::Mesh& mesh) {
  if (face_normals.rows() != mesh.face_count())
    throw ArgumentError("loss_normal: normals/face count mismatch");
  std::vector<int> left, right;
  left.reserve(mesh.edge_faces().size());
  right.reserve(mesh.edge_faces().size());
  const Mat& normals = face_normals.value();
  for (const geom::EdgeFaces& ef : mesh.edge_faces()) {
    if (ef.left < 0 || ef.right < 0) continue;  // open edge
    // Degenerate faces have zero normals; exclude their edges.
    if (normals.row(ef.left).isZero() || normals.row(ef.right).isZero())
      continue;
    left.push_back(ef.left);
    right.push_back(ef.right);
  }
  if (left.empty()) return ad::Tensor::scalar(Real(0));
  const ad::Tensor nl = ad::gather_rows(face_normals, left);
  const ad::Tensor nr = ad::gather_rows(face_normals, right);
  const ad::Tensor cos_angle = ad::dot(nl, nr);
  return ad::mean(ad::square(ad::affine(cos_angle, Real(-1), Real(1))));
}

ad::Tensor loss_icr(const ad::Tensor& positions, const geom::Mesh& mesh) {
  std::vector<int> i0, i1, i2;
  const Mat& pos = positions.value();
  for (const geom::Face& f : mesh.faces()) {
    if (f.size != 3)
      throw ArgumentError("loss_icr: mesh must be triangular");
    // Exclude currently-degenerate faces (they have no defined ICR and the
    // sqrt gradients blow up); extreme deformations may collapse triangles
    // transiently.
    const Vec3 a = pos.row(f[0]).transpose();
    const Vec3 b = pos.row(f[1]).transpose();
    const Vec3 c = pos.row(f[2]).transpose();
    if ((b - a).cross(c - a).squaredNorm() <= Real(1e-24)) continue;
    i0.push_back(f[0]);
    i1.push_back(f[1]);
    i2.push_back(f[2]);
  }
  if (i0.empty()) return ad::Tensor::scalar(Real(0));

  const ad::Tensor p0 = ad::gather_rows(positions, i0);
  const ad::Tensor p1 = ad::gather_rows(positions, i1);
  const ad::Tensor p2 = ad::gather_rows(positions, i2);

  const ad::Tensor e01 = ad::sub(p1, p0);
  const ad::Tensor e12 = ad::sub(p2, p1);
  const ad::Tensor e20 = ad::sub(p0, p2);

  const ad::Tensor a = ad::sqrt(ad::dot(e12, e12));
  const ad::Tensor b = ad::sqrt(ad::dot(e20, e20));
  const ad::Tensor c = ad::sqrt(ad::dot(e01, e01));

  const ad::Tensor cross = ad::cross(e01, ad::neg(e20));  // (p1-p0) x (p2-p0)
  const ad::Tensor area_sq =
      ad::affine(ad::dot(cross, cross), Real(0.25), Real(0));  // area^2

  // 2r/R = 16 * area^2 / ((a+b+c) * a * b * c)
  const ad::Tensor perimeter = ad::add(ad::add(a, b), c);
  const ad::Tensor denom = ad::mul(perimeter, ad::mul(a, ad::mul(b, c)));
  const ad::Tensor icr =
      ad::div(ad::affine(area_sq, Real(16), Real(0)), denom);
  return ad::mean(ad::affine(icr, Real(-1), Real(1)));
}

ad::Tensor loss_mask(const render::ImageBuffer& gt_mask,
                     const render::SoftMask& soft) {
  const auto& band = *soft.band;
  if (gt_mask.width != band.width || gt_mask.height != band.height ||
      gt_mask.channels != 1)
    throw ArgumentError("loss_mask: mask resolution mismatch");

  const Index total = static_cast<Index>(gt_mask.pixel_count());
  // Constant contribution of the saturated region: |m - 1| over fixed-one
  // pixels and |m - 0| elsewhere outside the band.
  double fixed_abs = 0;
  for (std::size_t pix = 0; pix < gt_mask.pixel_count(); ++pix) {
    if (band.in_band.empty() ? false : band.in_band[pix]) continue;
    const double gt = static_cast<double>(gt_mask.data[pix]);
    const bool one = !band.fixed_one.empty() && band.fixed_one[pix];
    fixed_abs += std::abs(gt - (one ? 1.0 : 0.0));
  }

  if (band.band.empty())
    return ad::Tensor::scalar(static_cast<Real>(fixed_abs) /
                              static_cast<Real>(total));

  Mat gt_band(static_cast<Index>(band.band.size()), 1);
  for (std::size_t i = 0; i < band.band.size(); ++i)
    gt_band(static_cast<Index>(i), 0) = static_cast<Real>(
        gt_mask.data[static_cast<std::size_t>(band.band[i])]);

  const ad::Tensor band_abs = ad::sum(
      ad::abs(ad::sub(ad::Tensor::constant(std::move(gt_band)),
                      soft.band_values)));
  return ad::affine(
      ad::add(band_abs, ad::Tensor::scalar(static_cast<Real>(fixed_abs))),
      Real(1) / static_cast<Real>(total), Real(0));
}

ad::Tensor loss_photometric(const Mat& gt_covered, double uncovered_abs_sum,
                            Index total_sampled,
                            const render::ShadeResult& shaded, Real lambda_g) {
  if (total_sampled < 1)
    throw ArgumentError("loss_photometric: empty pixel set");
  if (gt_covered.rows() != shaded.base.rows())
    throw ArgumentError("loss_photometric: gt/shade row mismatch");

  const Real scale = Real(1) / static_cast<Real>(total_sampled * 3);
  const ad::Tensor gt = ad::Tensor::constant(gt_covered);
  const ad::Tensor uncovered =
      ad::Tensor::scalar(static_cast<Real>(uncovered_abs_sum));

  ad::Tensor base_term = uncovered;
  ad::Tensor final_term = uncovered;
  if (gt_covered.rows() > 0) {
    base_term =
        ad::add(ad::sum(ad::abs(ad::sub(gt, shaded.base))), uncovered);
    final_term =
        ad::add(ad::sum(ad::abs(ad::sub(gt, shaded.final))), uncovered);
  }
  return ad::add(ad::affine(base_term, scale, Real(0)),
                 ad::affine(final_term, scale * lambda_g, Real(0)));
}

}  // namespace defsurf::train
