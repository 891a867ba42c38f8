#include "defsurf/encode/encoding.hpp"

#include <cmath>

namespace defsurf::encode {

RffMatrix RffMatrix::sample(Index width, Real sigma, std::uint64_t seed) {
  if (width < 2 || width % 2 != 0)
    throw ArgumentError("RffMatrix: width must be a positive even number");
  if (!(sigma > Real(0)))
    throw ArgumentError("RffMatrix: sigma must be positive");
  RffMatrix rff;
  rff.sigma = sigma;
  rff.seed = seed;
  rff.frequencies.resize(width / 2, 3);
  rng::Engine engine(seed);
  rng::NormalSampler normal;
  for (Index r = 0; r < rff.frequencies.rows(); ++r)
    for (Index c = 0; c < 3; ++c)
      rff.frequencies(r, c) = static_cast<Real>(normal(engine)) * sigma;
  return rff;
}

Mat rff_encode(const Mat& points, const RffMatrix& rff) {
  if (points.cols() != 3) throw ArgumentError("rff_encode: points must be N x 3");
  const Mat transposed = rff.frequencies.transpose();
  const Mat phase = points * transposed;  // N x (d/2)
  Mat out(points.rows(), rff.width());
  for (Index c = 0; c < phase.cols(); ++c) {
    out.col(2 * c) = phase.col(c).array().cos();
    out.col(2 * c + 1) = phase.col(c).array().sin();
  }
  return out;
}

Mat octave_encode(const Mat& vectors, int octaves) {
  if (vectors.cols() != 3)
    throw ArgumentError("octave_encode: vectors must be N x 3");
  if (octaves < 1) throw ArgumentError("octave_encode: octaves must be >= 1");
  Mat out(vectors.rows(), 6 * octaves);
  for (int k = 0; k < octaves; ++k) {
    const Real scale = kPi * static_cast<Real>(1 << k);
    for (int axis = 0; axis < 3; ++axis) {
      const auto phase = (vectors.col(axis) * scale).array();
      out.col(6 * k + 2 * axis) = phase.cos();
      out.col(6 * k + 2 * axis + 1) = phase.sin();
    }
  }
  return out;
}

ad::Tensor rff_encode_t(const ad::Tensor& points, const RffMatrix& rff) {
  if (points.cols() != 3)
    throw ArgumentError("rff_encode_t: points must be N x 3");
  const ad::Tensor freq =
      ad::Tensor::constant(rff.frequencies.transpose());
  const ad::Tensor phase = ad::matmul(points, freq);
  return ad::interleave_cols(ad::cos(phase), ad::sin(phase));
}

ad::Tensor octave_encode_t(const ad::Tensor& vectors, int octaves) {
  if (vectors.cols() != 3)
    throw ArgumentError("octave_encode_t: vectors must be N x 3");
  if (octaves < 1) throw ArgumentError("octave_encode_t: octaves must be >= 1");
  std::vector<ad::Tensor> parts;
  parts.reserve(static_cast<std::size_t>(octaves) * 6);
  for (int k = 0; k < octaves; ++k) {
    const Real scale = kPi * static_cast<Real>(1 << k);
    for (int axis = 0; axis < 3; ++axis) {
      const ad::Tensor phase =
          ad::affine(ad::slice_cols(vectors, axis, 1), scale, Real(0));
      parts.push_back(ad::cos(phase));
      parts.push_back(ad::sin(phase));
    }
  }
  return ad::concat_cols(parts);
}

HybridEncoder::HybridEncoder(
    std::shared_ptr<const spectral::SpectralBasis> basis,
    std::shared_ptr<const spectral::SurfacePointLocator> locator,
    RffMatrix rff)
    : basis_(std::move(basis)), locator_(std::move(locator)), rff_(std::move(rff)) {
  if (!basis_ || !locator_)
    throw ConfigError("HybridEncoder: basis and locator are required");
  if (basis_->mesh_hash != locator_->mesh().content_hash())
    throw ConfigError("HybridEncoder: basis is not bound to the locator mesh");
}

Mat HybridEncoder::intrinsic(const Mat& domain_points,
                             const std::vector<int>* vertex_ids) const {
  if (zero_intrinsic) return Mat::Zero(domain_points.rows(), intrinsic_width());
  Mat rows;
  if (vertex_ids != nullptr) {
    if (static_cast<Index>(vertex_ids->size()) != domain_points.rows())
      throw ArgumentError("intrinsic: vertex_ids size mismatch");
    rows.resize(domain_points.rows(), basis_->count());
    for (Index i = 0; i < rows.rows(); ++i) {
      const int v = (*vertex_ids)[static_cast<std::size_t>(i)];
      if (v < 0 || v >= basis_->vertex_count())
        throw ArgumentError("intrinsic: vertex id out of range");
      rows.row(i) = basis_->eigenfunctions.row(v);
    }
  } else {
    rows = spectral::interpolate_to_points(*basis_, *locator_, domain_points);
  }
  if (scale_by_eigenvalue) {
    for (Index c = 0; c < rows.cols(); ++c) {
      const Real lambda = basis_->eigenvalues[c];
      rows.col(c) *= lambda > Real(1e-12)
                         ? Real(1) / std::sqrt(lambda)
                         : Real(0);
    }
  }
  return rows;
}

Mat HybridEncoder::extrinsic(const Mat& ambient_points) const {
  if (zero_extrinsic)
    return Mat::Zero(ambient_points.rows(), extrinsic_width());
  return rff_encode(ambient_points, rff_);
}

Mat HybridEncoder::hybrid(const Mat& domain_points,
                          const std::vector<int>* vertex_ids) const {
  Mat out(domain_points.rows(), width());
  out.leftCols(intrinsic_width()) = intrinsic(domain_points, vertex_ids);
  out.rightCols(extrinsic_width()) = extrinsic(domain_points);
  return out;
}

}  // namespace defsurf::encode
