#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "defsurf/ad/ops.hpp"
#include "defsurf/spectral/interpolate.hpp"

namespace defsurf::encode {

// Random Fourier feature frequencies: width/2 rows sampled i.i.d. from an
// isotropic Gaussian with std `sigma`, deterministic for a fixed seed.
struct RffMatrix {
  Mat frequencies;  // (width/2) x 3
  Real sigma = 0;
  std::uint64_t seed = 0;

  Index width() const { return frequencies.rows() * 2; }
  static RffMatrix sample(Index width, Real sigma, std::uint64_t seed);
};

// gamma_E: interleaved [cos(b_i . x), sin(b_i . x), ...] rows, one per point.
Mat rff_encode(const Mat& points, const RffMatrix& rff);

// Octave Fourier encoding of a 3-vector: per octave k, cos/sin of
// 2^k * pi * v for each axis; width 6 * octaves.
Mat octave_encode(const Mat& vectors, int octaves);

// Tape counterparts built from autodiff primitives; values agree with the
// plain versions bit for bit.
ad::Tensor rff_encode_t(const ad::Tensor& points, const RffMatrix& rff);
ad::Tensor octave_encode_t(const ad::Tensor& vectors, int octaves);

// Hybrid encoder gamma_H = [gamma_I | gamma_E] over a selected eigenbasis
// and an RFF matrix. Ablation switches zero one block while keeping widths
// (and therefore checkpoints) unchanged.
class HybridEncoder {
 public:
  HybridEncoder(std::shared_ptr<const spectral::SpectralBasis> basis,
                std::shared_ptr<const spectral::SurfacePointLocator> locator,
                RffMatrix rff);

  Index intrinsic_width() const { return basis_->count(); }
  Index extrinsic_width() const { return rff_.width(); }
  Index width() const { return intrinsic_width() + extrinsic_width(); }

  const spectral::SpectralBasis& basis() const { return *basis_; }
  const spectral::SurfacePointLocator& locator() const { return *locator_; }
  const RffMatrix& rff() const { return rff_; }

  bool zero_intrinsic = false;
  bool zero_extrinsic = false;
  // Optional GPS-style scaling of intrinsic channels by 1/sqrt(lambda).
  bool scale_by_eigenvalue = false;

  // gamma_I rows; `vertex_ids` enables exact per-vertex lookup when the
  // points are vertices of the basis mesh.
  Mat intrinsic(const Mat& domain_points,
                const std::vector<int>* vertex_ids = nullptr) const;

  // gamma_H rows with both blocks evaluated at the same points.
  Mat hybrid(const Mat& domain_points,
             const std::vector<int>* vertex_ids = nullptr) const;

  Mat extrinsic(const Mat& ambient_points) const;

 private:
  std::shared_ptr<const spectral::SpectralBasis> basis_;
  std::shared_ptr<const spectral::SurfacePointLocator> locator_;
  RffMatrix rff_;
};

}  // namespace defsurf::encode
