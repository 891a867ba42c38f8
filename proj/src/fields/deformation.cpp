#include "defsurf/fields/deformation.hpp"

namespace defsurf::fields {

DeformationField::DeformationField(
    const DeformationConfig& config,
    std::shared_ptr<const spectral::SpectralBasis> basis,
    std::shared_ptr<const spectral::SurfacePointLocator> locator)
    : config_(config), basis_(std::move(basis)), locator_(std::move(locator)) {
  if (!basis_ || !locator_)
    throw ConfigError("DeformationField: basis and locator are required");
  rff_coarse_ = encode::RffMatrix::sample(
      config_.coarse_rff_width, config_.sigma_coarse,
      rng::derive_seed(config_.seed, "rff_coarse"));
  rff_fine_ = encode::RffMatrix::sample(config_.fine_rff_width,
                                        config_.sigma_fine,
                                        rng::derive_seed(config_.seed, "rff_fine"));

  if (!config_.no_coarse) {
    ad::MlpConfig coarse;
    coarse.input = config_.coarse_rff_width;
    coarse.hidden = {config_.hidden_width};
    coarse.output = 3;
    coarse.activation = ad::Activation::Softplus;
    coarse_net_ =
        ad::Mlp::init(coarse, rng::derive_seed(config_.seed, "coarse_net"), true);
  }

  ad::MlpConfig fine;
  fine.input = hybrid_width();
  fine.hidden = {config_.hidden_width};
  fine.output = 3 + config_.z_width;
  fine.activation = ad::Activation::Softplus;
  fine_net_ =
      ad::Mlp::init(fine, rng::derive_seed(config_.seed, "fine_net"), true);
}

Index DeformationField::hybrid_width() const {
  return basis_->count() + config_.fine_rff_width;
}

ad::Tensor DeformationField::deform_coarse(const Mat& domain_points) const {
  const ad::Tensor x = ad::Tensor::constant(domain_points);
  if (config_.no_coarse) return x;
  const ad::Tensor encoded =
      ad::Tensor::constant(encode::rff_encode(domain_points, rff_coarse_));
  const ad::Tensor displacement = coarse_net_.forward(encoded);
  return ad::add(x, ad::affine(displacement, config_.delta_coarse, Real(0)));
}

Mat DeformationField::intrinsic_for(const Mat& domain_points,
                                    const std::vector<int>* vertex_ids) const {
  if (config_.zero_intrinsic)
    return Mat::Zero(domain_points.rows(), basis_->count());
  if (vertex_ids != nullptr) {
    if (static_cast<Index>(vertex_ids->size()) != domain_points.rows())
      throw ArgumentError("deform_full: vertex_ids size mismatch");
    Mat rows(domain_points.rows(), basis_->count());
    for (Index i = 0; i < rows.rows(); ++i)
      rows.row(i) = basis_->eigenfunctions.row(
          (*vertex_ids)[static_cast<std::size_t>(i)]);
    return rows;
  }
  return spectral::interpolate_to_points(*basis_, *locator_, domain_points);
}

DeformationField::Eval DeformationField::deform_full(
    const Mat& domain_points, const std::vector<int>* vertex_ids, Real delta,
    const Mat* intrinsic_override, const Mat* coarse_override) const {
  forward_evaluations_ += domain_points.rows();
  const ad::Tensor coarse = coarse_override
                                ? ad::Tensor::constant(*coarse_override)
                                : deform_coarse(domain_points);

  if (intrinsic_override &&
      (intrinsic_override->rows() != domain_points.rows() ||
       intrinsic_override->cols() != basis_->count()))
    throw ArgumentError("deform_full: intrinsic override shape mismatch");
  const ad::Tensor intrinsic = ad::Tensor::constant(
      intrinsic_override ? *intrinsic_override
                         : intrinsic_for(domain_points, vertex_ids));

  ad::Tensor extrinsic;
  if (config_.zero_extrinsic) {
    extrinsic = ad::Tensor::constant(
        Mat::Zero(domain_points.rows(), config_.fine_rff_width));
  } else if (config_.fine_extrinsic_on_coarse_output) {
    // Differentiable through the coarse stage unless it is frozen (a frozen
    // coarse net makes `coarse` a constant subgraph).
    extrinsic = encode::rff_encode_t(coarse, rff_fine_);
  } else {
    extrinsic = ad::Tensor::constant(encode::rff_encode(domain_points, rff_fine_));
  }

  const ad::Tensor hybrid = ad::concat_cols({intrinsic, extrinsic});
  const ad::Tensor heads = fine_net_.forward(hybrid);
  const ad::Tensor displacement = ad::slice_cols(heads, 0, 3);

  Eval eval;
  eval.positions = ad::add(coarse, ad::affine(displacement, delta, Real(0)));
  eval.features = ad::slice_cols(heads, 3, config_.z_width);
  return eval;
}

DeformationField::Eval DeformationField::deform_mesh(const geom::Mesh& domain,
                                                     Real delta) const {
  const bool coarse_constant = coarse_frozen_ || config_.no_coarse;
  if (!coarse_constant)
    return deform_full(domain.vertex_matrix(), nullptr, delta,
                       &intrinsic_rows(domain));

  // Frozen coarse stage: its output and therefore the whole fine-net input
  // are constant per mesh, so both are cached across steps.
  const std::uint64_t key = domain.content_hash();
  auto coarse_it = coarse_cache_.find(key);
  if (coarse_it == coarse_cache_.end()) {
    Mat coarse_values = config_.no_coarse
                            ? domain.vertex_matrix()
                            : deform_coarse(domain.vertex_matrix()).value();
    coarse_it = coarse_cache_.emplace(key, std::move(coarse_values)).first;
  }
  auto hybrid_it = hybrid_cache_.find(key);
  if (hybrid_it == hybrid_cache_.end()) {
    Mat hybrid(domain.vertex_count(), hybrid_width());
    hybrid.leftCols(basis_->count()) = intrinsic_rows(domain);
    if (config_.zero_extrinsic) {
      hybrid.rightCols(config_.fine_rff_width).setZero();
    } else {
      hybrid.rightCols(config_.fine_rff_width) = encode::rff_encode(
          config_.fine_extrinsic_on_coarse_output ? coarse_it->second
                                                  : domain.vertex_matrix(),
          rff_fine_);
    }
    hybrid_it = hybrid_cache_.emplace(key, std::move(hybrid)).first;
  }

  forward_evaluations_ += domain.vertex_count();
  const ad::Tensor heads =
      fine_net_.forward(ad::Tensor::constant(hybrid_it->second));
  Eval eval;
  eval.positions =
      ad::add(ad::Tensor::constant(coarse_it->second),
              ad::affine(ad::slice_cols(heads, 0, 3), delta, Real(0)));
  eval.features = ad::slice_cols(heads, 3, config_.z_width);
  return eval;
}

const Mat& DeformationField::intrinsic_rows(const geom::Mesh& domain) const {
  const std::uint64_t key = domain.content_hash();
  auto it = intrinsic_cache_.find(key);
  if (it != intrinsic_cache_.end()) return it->second;
  Mat rows;
  if (config_.zero_intrinsic) {
    rows = Mat::Zero(domain.vertex_count(), basis_->count());
  } else if (key == basis_->mesh_hash) {
    rows = basis_->eigenfunctions;
  } else {
    rows = spectral::interpolate_to_points(*basis_, *locator_,
                                           domain.vertex_matrix());
  }
  return intrinsic_cache_.emplace(key, std::move(rows)).first->second;
}

geom::Mesh DeformationField::extract_mesh(const geom::Mesh& domain,
                                          Real delta) const {
  const Mat domain_points = domain.vertex_matrix();
  const Mat intrinsic = intrinsic_rows(domain);

  // Plain (no-tape) forward pass mirroring deform_full.
  forward_evaluations_ += domain_points.rows();
  Mat coarse = domain_points;
  if (!config_.no_coarse) {
    const ad::Tensor out = coarse_net_.forward(
        ad::Tensor::constant(encode::rff_encode(domain_points, rff_coarse_)));
    coarse += config_.delta_coarse * out.value();
  }
  Mat extrinsic;
  if (config_.zero_extrinsic) {
    extrinsic = Mat::Zero(domain_points.rows(), config_.fine_rff_width);
  } else {
    extrinsic = encode::rff_encode(
        config_.fine_extrinsic_on_coarse_output ? coarse : domain_points,
        rff_fine_);
  }
  Mat hybrid(domain_points.rows(), hybrid_width());
  hybrid.leftCols(intrinsic.cols()) = intrinsic;
  hybrid.rightCols(extrinsic.cols()) = extrinsic;
  const ad::Tensor heads =
      fine_net_.forward(ad::Tensor::constant(std::move(hybrid)));
  const Mat positions = coarse + delta * heads.value().leftCols(3);

  std::vector<Vec3> verts(static_cast<std::size_t>(positions.rows()));
  for (Index i = 0; i < positions.rows(); ++i)
    verts[static_cast<std::size_t>(i)] = positions.row(i).transpose();
  return geom::Mesh(std::move(verts), domain.faces());
}

void DeformationField::freeze_coarse() {
  coarse_frozen_ = true;
  if (!config_.no_coarse) coarse_net_.set_requires_grad(false);
}

std::vector<ad::Tensor> DeformationField::coarse_parameters() const {
  if (config_.no_coarse) return {};
  return coarse_net_.parameters();
}

std::vector<ad::Tensor> DeformationField::fine_parameters() const {
  return fine_net_.parameters();
}

}  // namespace defsurf::fields
