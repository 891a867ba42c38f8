#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "defsurf/fields/deformation.hpp"
#include "defsurf/render/shader.hpp"
#include "defsurf/scenes/dataset.hpp"
#include "defsurf/train/losses.hpp"
#include "defsurf/train/sampler.hpp"

namespace defsurf::train {

struct Schedule {
  int coarse_iters = 200;
  int fine_iters = 600;
  int coarse_mesh_level = 3;
  int fine_mesh_level = 5;
  int views_per_step = 6;
  Real pixel_fraction = Real(0.05);
  Real lr_shader = Real(1e-3);
  Real lr_deform = Real(2e-3);
  Real lr_decay_at_refine = Real(0.75);
  int delta_ramp_iters = 100;
  Real delta_max = Real(0.1);
  std::uint64_t seed = 1234;

  void validate() const;
};

struct EncoderSettings {
  int basis_mesh_level = 4;
  Index eigen_count = 200;  // eigenpairs computed on the basis mesh
  Index low_band = 120;
  Index high_begin = 120;
  Index high_end = 200;
  Index coarse_rff_width = 256;
  Index fine_rff_width = 256;
  Real sigma_coarse = Real(0.5);
  Real sigma_fine = Real(4);
  bool eigenvalue_scaling = false;
  bool fine_extrinsic_on_coarse_output = true;
};

struct ShaderSettings {
  Index z_width = 128;
  Index hidden = 256;
  int hidden_layers = 3;
  int view_octaves = 4;
  int normal_octaves = 3;
};

struct RasterSettings {
  Real soft_mask_sharpness = Real(30);  // per pixel
  int band_px = 3;
};

struct AblationFlags {
  bool no_intrinsic = false;
  bool no_extrinsic = false;
  bool no_coarse = false;
  bool no_geometry_shader = false;
};

struct TrainConfig {
  Schedule schedule;
  LossWeights weights;
  EncoderSettings encoder;
  ShaderSettings shader;
  RasterSettings raster;
  AblationFlags ablation;
  int threads = 0;  // 0 = hardware default; 1 = deterministic mode
  int checkpoint_every = 0;  // 0 = final only
  int preview_every = 0;     // 0 = none
  std::string cache_dir;     // eigenbasis cache ("" = <out_dir>/cache)

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Shared model construction (training, checkpoint loading, evaluation).
struct ModelBundle {
  std::shared_ptr<fields::DeformationField> field;
  std::shared_ptr<render::ShaderPair> shaders;
  std::shared_ptr<const spectral::SpectralBasis> selected_basis;
  std::shared_ptr<const spectral::SurfacePointLocator> locator;
  geom::Mesh basis_mesh;
};

ModelBundle build_model(const TrainConfig& config,
                        const std::filesystem::path& cache_dir);

// Frozen per-step discrete decisions (coverage, silhouette band, pixel
// sample), so the continuous loss can be rebuilt for gradient audits.
struct ViewPlan {
  int view = -1;
  render::RasterCoverage coverage;
  render::SilhouetteBand band;
  std::vector<int> sampled_pixels;   // linear indices
  std::vector<int> covered_rows;     // rows into the covered list
  Mat gt_covered;                    // K x 3
  double uncovered_abs_sum = 0;
  bool skipped = false;
  bool used_union = false;
};

struct StepPlan {
  std::vector<ViewPlan> views;
};

StepPlan plan_step(const scenes::SceneDataset& dataset, const geom::Mesh& mesh,
                   const Mat& positions, const std::vector<int>& view_ids,
                   Real pixel_fraction, const RasterSettings& raster,
                   rng::Engine& pixel_rng);

struct LossBreakdown {
  ad::Tensor total;
  double photometric = 0;
  double mask = 0;
  double normal = 0;
  double icr = 0;
};

// Builds the full step loss on the tape from a frozen plan. Throws
// DivergenceError naming the component if any value is non-finite.
LossBreakdown build_step_loss(const StepPlan& plan,
                              const scenes::SceneDataset& dataset,
                              const geom::Mesh& mesh,
                              const fields::DeformationField::Eval& eval,
                              const render::ShaderPair& shaders,
                              const LossWeights& weights,
                              const RasterSettings& raster);

struct TrainResult {
  ModelBundle model;
  geom::Mesh fine_domain;
  double wall_seconds = 0;
  long steps = 0;
  double final_loss = 0;
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
};

// Two-stage coarse-to-fine driver. Writes the resolved config, JSONL
// metrics, checkpoints, and optional previews under `out_dir`.
TrainResult train(const scenes::SceneDataset& dataset, TrainConfig config,
                  const std::filesystem::path& out_dir);

}  // namespace defsurf::train
