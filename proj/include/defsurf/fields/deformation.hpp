#pragma once

#include <map>
#include <memory>
#include <optional>

#include "defsurf/ad/nn.hpp"
#include "defsurf/encode/encoding.hpp"
#include "defsurf/geometry/primitives.hpp"

namespace defsurf::fields {

// Residual scale ramp of the fine stage: 0 before `fine_start`, linear up to
// `max_delta` over `ramp_iters`, constant afterwards.
struct DeltaSchedule {
  long fine_start = 0;
  long ramp_iters = 100;
  Real max_delta = Real(0.1);

  Real at(long iteration) const {
    if (iteration <= fine_start) return Real(0);
    const long progress = iteration - fine_start;
    if (progress >= ramp_iters) return max_delta;
    return max_delta * static_cast<Real>(progress) /
           static_cast<Real>(ramp_iters);
  }
};

struct DeformationConfig {
  Index coarse_rff_width = 256;
  Index fine_rff_width = 256;
  Real sigma_coarse = Real(0.5);
  Real sigma_fine = Real(4);
  Index hidden_width = 400;
  Index z_width = 128;
  Real delta_coarse = Real(1);
  // Fine extrinsic channels encode the coarse output by default; switchable
  // to the raw domain point.
  bool fine_extrinsic_on_coarse_output = true;
  bool no_coarse = false;       // ablation: fine field only, c = x
  bool zero_intrinsic = false;  // ablation: gamma_I channels zeroed
  bool zero_extrinsic = false;  // ablation: fine gamma_E channels zeroed
  std::uint64_t seed = 1;
};

// The composed deformation: y = c + delta * MLP_pos(gamma_H), with
// c = x + delta_c * MLP_c(gamma_E(x)), plus the feature head
// z = MLP_feat(gamma_H) sharing the hidden layer. Intrinsic channels are
// keyed to the domain point x; extrinsic channels encode c.
class DeformationField {
 public:
  DeformationField(const DeformationConfig& config,
                   std::shared_ptr<const spectral::SpectralBasis> basis,
                   std::shared_ptr<const spectral::SurfacePointLocator> locator);

  const DeformationConfig& config() const { return config_; }
  Index hybrid_width() const;

  struct Eval {
    ad::Tensor positions;  // N x 3
    ad::Tensor features;   // N x z_width
  };

  // Coarse stage only: x + delta_c * MLP_c(gamma_E(x)).
  ad::Tensor deform_coarse(const Mat& domain_points) const;

  // Full two-stage evaluation at the given residual scale. `vertex_ids`
  // enables exact intrinsic lookup when the points are basis-mesh vertices;
  // `intrinsic_override` injects precomputed gamma_I rows.
  Eval deform_full(const Mat& domain_points, const std::vector<int>* vertex_ids,
                   Real delta, const Mat* intrinsic_override = nullptr,
                   const Mat* coarse_override = nullptr) const;

  // deform_full over the vertices of a domain mesh, reusing the per-mesh
  // intrinsic row cache.
  Eval deform_mesh(const geom::Mesh& domain, Real delta) const;

  // Plain forward: deformed mesh with the connectivity of `domain`, one
  // field evaluation per vertex.
  geom::Mesh extract_mesh(const geom::Mesh& domain, Real delta) const;

  void freeze_coarse();
  bool coarse_frozen() const { return coarse_frozen_; }

  // Precomputes and caches the intrinsic rows for a domain mesh (keyed by
  // content hash); extraction and training reuse the cache.
  const Mat& intrinsic_rows(const geom::Mesh& domain) const;

  std::vector<ad::Tensor> coarse_parameters() const;
  std::vector<ad::Tensor> fine_parameters() const;

  ad::Mlp& coarse_net() { return coarse_net_; }
  const ad::Mlp& coarse_net() const { return coarse_net_; }
  ad::Mlp& fine_net() { return fine_net_; }
  const ad::Mlp& fine_net() const { return fine_net_; }
  const encode::RffMatrix& coarse_rff() const { return rff_coarse_; }
  const encode::RffMatrix& fine_rff() const { return rff_fine_; }
  const spectral::SpectralBasis& basis() const { return *basis_; }
  const spectral::SurfacePointLocator& locator() const { return *locator_; }

  long forward_evaluations() const { return forward_evaluations_; }

 private:
  Mat intrinsic_for(const Mat& domain_points,
                    const std::vector<int>* vertex_ids) const;

  DeformationConfig config_;
  std::shared_ptr<const spectral::SpectralBasis> basis_;
  std::shared_ptr<const spectral::SurfacePointLocator> locator_;
  encode::RffMatrix rff_coarse_;
  encode::RffMatrix rff_fine_;
  ad::Mlp coarse_net_;  // gamma_E width -> hidden -> 3
  ad::Mlp fine_net_;    // gamma_H width -> hidden -> 3 + z_width
  bool coarse_frozen_ = false;
  mutable std::map<std::uint64_t, Mat> intrinsic_cache_;
  mutable std::map<std::uint64_t, Mat> coarse_cache_;
  mutable std::map<std::uint64_t, Mat> hybrid_cache_;
  mutable long forward_evaluations_ = 0;
};

}  // namespace defsurf::fields
