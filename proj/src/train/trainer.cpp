#include "defsurf/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "defsurf/io/checkpoint.hpp"

namespace defsurf::train {

void Schedule::validate() const {
  if (coarse_iters < 0 || fine_iters < 0)
    throw ConfigError("Schedule: iteration counts must be >= 0");
  if (coarse_mesh_level > fine_mesh_level)
    throw ConfigError("Schedule: coarse_mesh_level must be <= fine_mesh_level");
  if (!(pixel_fraction > Real(0)) || pixel_fraction > Real(1))
    throw ConfigError("Schedule: pixel_fraction must be in (0, 1]");
  if (views_per_step < 1) throw ConfigError("Schedule: views_per_step >= 1");
  if (!(lr_shader > Real(0)) || !(lr_deform > Real(0)))
    throw ConfigError("Schedule: learning rates must be positive");
}

void TrainConfig::validate() const {
  schedule.validate();
  weights.validate();
  if (encoder.low_band < 0 || encoder.high_begin < encoder.low_band ||
      encoder.high_end < encoder.high_begin ||
      encoder.high_end > encoder.eigen_count)
    throw ConfigError("TrainConfig: malformed eigen band policy");
  if (!(raster.soft_mask_sharpness > Real(0)))
    throw ConfigError("TrainConfig: soft_mask_sharpness must be positive");
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_real(const nlohmann::json& j, const char* key, Real& out) {
  if (j.contains(key)) out = static_cast<Real>(j.at(key).get<double>());
}

void read_index(const nlohmann::json& j, const char* key, Index& out) {
  if (j.contains(key)) out = static_cast<Index>(j.at(key).get<long>());
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["schedule"] = {
      {"coarse_iters", schedule.coarse_iters},
      {"fine_iters", schedule.fine_iters},
      {"coarse_mesh_level", schedule.coarse_mesh_level},
      {"fine_mesh_level", schedule.fine_mesh_level},
      {"views_per_step", schedule.views_per_step},
      {"pixel_fraction", static_cast<double>(schedule.pixel_fraction)},
      {"lr_shader", static_cast<double>(schedule.lr_shader)},
      {"lr_deform", static_cast<double>(schedule.lr_deform)},
      {"lr_decay_at_refine", static_cast<double>(schedule.lr_decay_at_refine)},
      {"delta_ramp_iters", schedule.delta_ramp_iters},
      {"delta_max", static_cast<double>(schedule.delta_max)},
      {"seed", schedule.seed}};
  j["weights"] = {{"lambda_c", static_cast<double>(weights.lambda_c)},
                  {"lambda_m", static_cast<double>(weights.lambda_m)},
                  {"lambda_n", static_cast<double>(weights.lambda_n)},
                  {"lambda_g", static_cast<double>(weights.lambda_g)},
                  {"lambda_icr", static_cast<double>(weights.lambda_icr)},
                  {"icr_enabled", weights.icr_enabled}};
  j["encoder"] = {
      {"basis_mesh_level", encoder.basis_mesh_level},
      {"eigen_count", static_cast<long>(encoder.eigen_count)},
      {"low_band", static_cast<long>(encoder.low_band)},
      {"high_begin", static_cast<long>(encoder.high_begin)},
      {"high_end", static_cast<long>(encoder.high_end)},
      {"coarse_rff_width", static_cast<long>(encoder.coarse_rff_width)},
      {"fine_rff_width", static_cast<long>(encoder.fine_rff_width)},
      {"sigma_coarse", static_cast<double>(encoder.sigma_coarse)},
      {"sigma_fine", static_cast<double>(encoder.sigma_fine)},
      {"eigenvalue_scaling", encoder.eigenvalue_scaling},
      {"fine_extrinsic_on_coarse_output",
       encoder.fine_extrinsic_on_coarse_output}};
  j["shader"] = {{"z_width", static_cast<long>(shader.z_width)},
                 {"hidden", static_cast<long>(shader.hidden)},
                 {"hidden_layers", shader.hidden_layers},
                 {"view_octaves", shader.view_octaves},
                 {"normal_octaves", shader.normal_octaves}};
  j["raster"] = {
      {"soft_mask_sharpness", static_cast<double>(raster.soft_mask_sharpness)},
      {"band_px", raster.band_px}};
  j["ablation"] = {{"no_intrinsic", ablation.no_intrinsic},
                   {"no_extrinsic", ablation.no_extrinsic},
                   {"no_coarse", ablation.no_coarse},
                   {"no_geometry_shader", ablation.no_geometry_shader}};
  j["threads"] = threads;
  j["checkpoint_every"] = checkpoint_every;
  j["preview_every"] = preview_every;
  j["cache_dir"] = cache_dir;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    read_if(s, "coarse_iters", cfg.schedule.coarse_iters);
    read_if(s, "fine_iters", cfg.schedule.fine_iters);
    read_if(s, "coarse_mesh_level", cfg.schedule.coarse_mesh_level);
    read_if(s, "fine_mesh_level", cfg.schedule.fine_mesh_level);
    read_if(s, "views_per_step", cfg.schedule.views_per_step);
    read_real(s, "pixel_fraction", cfg.schedule.pixel_fraction);
    read_real(s, "lr_shader", cfg.schedule.lr_shader);
    read_real(s, "lr_deform", cfg.schedule.lr_deform);
    read_real(s, "lr_decay_at_refine", cfg.schedule.lr_decay_at_refine);
    read_if(s, "delta_ramp_iters", cfg.schedule.delta_ramp_iters);
    read_real(s, "delta_max", cfg.schedule.delta_max);
    read_if(s, "seed", cfg.schedule.seed);
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    read_real(w, "lambda_c", cfg.weights.lambda_c);
    read_real(w, "lambda_m", cfg.weights.lambda_m);
    read_real(w, "lambda_n", cfg.weights.lambda_n);
    read_real(w, "lambda_g", cfg.weights.lambda_g);
    read_real(w, "lambda_icr", cfg.weights.lambda_icr);
    read_if(w, "icr_enabled", cfg.weights.icr_enabled);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    read_if(e, "basis_mesh_level", cfg.encoder.basis_mesh_level);
    read_index(e, "eigen_count", cfg.encoder.eigen_count);
    read_index(e, "low_band", cfg.encoder.low_band);
    read_index(e, "high_begin", cfg.encoder.high_begin);
    read_index(e, "high_end", cfg.encoder.high_end);
    read_index(e, "coarse_rff_width", cfg.encoder.coarse_rff_width);
    read_index(e, "fine_rff_width", cfg.encoder.fine_rff_width);
    read_real(e, "sigma_coarse", cfg.encoder.sigma_coarse);
    read_real(e, "sigma_fine", cfg.encoder.sigma_fine);
    read_if(e, "eigenvalue_scaling", cfg.encoder.eigenvalue_scaling);
    read_if(e, "fine_extrinsic_on_coarse_output",
            cfg.encoder.fine_extrinsic_on_coarse_output);
  }
  if (j.contains("shader")) {
    const auto& s = j["shader"];
    read_index(s, "z_width", cfg.shader.z_width);
    read_index(s, "hidden", cfg.shader.hidden);
    read_if(s, "hidden_layers", cfg.shader.hidden_layers);
    read_if(s, "view_octaves", cfg.shader.view_octaves);
    read_if(s, "normal_octaves", cfg.shader.normal_octaves);
  }
  if (j.contains("raster")) {
    const auto& r = j["raster"];
    read_real(r, "soft_mask_sharpness", cfg.raster.soft_mask_sharpness);
    read_if(r, "band_px", cfg.raster.band_px);
  }
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    read_if(a, "no_intrinsic", cfg.ablation.no_intrinsic);
    read_if(a, "no_extrinsic", cfg.ablation.no_extrinsic);
    read_if(a, "no_coarse", cfg.ablation.no_coarse);
    read_if(a, "no_geometry_shader", cfg.ablation.no_geometry_shader);
  }
  read_if(j, "threads", cfg.threads);
  read_if(j, "checkpoint_every", cfg.checkpoint_every);
  read_if(j, "preview_every", cfg.preview_every);
  read_if(j, "cache_dir", cfg.cache_dir);
  cfg.validate();
  return cfg;
}

ModelBundle build_model(const TrainConfig& config,
                        const std::filesystem::path& cache_dir) {
  ModelBundle bundle;
  bundle.basis_mesh = geom::icosphere(config.encoder.basis_mesh_level);
  const std::uint64_t mesh_hash = bundle.basis_mesh.content_hash();

  std::filesystem::path cache_file;
  std::optional<spectral::SpectralBasis> basis;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    char name[64];
    std::snprintf(name, sizeof(name), "eigenbasis_%016llx_d%ld.bin",
                  static_cast<unsigned long long>(mesh_hash),
                  static_cast<long>(config.encoder.eigen_count));
    cache_file = cache_dir / name;
    basis = spectral::load_basis_cache(cache_file, mesh_hash,
                                       config.encoder.eigen_count);
  }
  if (!basis) {
    const spectral::LaplacianPair pair =
        spectral::cotan_laplacian(bundle.basis_mesh);
    // Dense route on basis-sized meshes, iterative when the mesh is large
    // relative to the requested band.
    if (bundle.basis_mesh.vertex_count() <= 4096 ||
        config.encoder.eigen_count * 4 > bundle.basis_mesh.vertex_count())
      basis = spectral::eigenbasis(pair, config.encoder.eigen_count, mesh_hash);
    else
      basis = spectral::eigenbasis_iterative(
          pair, config.encoder.eigen_count, mesh_hash);
    if (!cache_file.empty()) spectral::save_basis_cache(cache_file, *basis);
  }

  spectral::EigenSelection policy{config.encoder.low_band,
                                  config.encoder.high_begin,
                                  config.encoder.high_end};
  auto selected = std::make_shared<spectral::SpectralBasis>(
      spectral::select_eigenfunctions(*basis, policy));
  auto locator =
      std::make_shared<spectral::SurfacePointLocator>(bundle.basis_mesh);

  fields::DeformationConfig field_config;
  field_config.coarse_rff_width = config.encoder.coarse_rff_width;
  field_config.fine_rff_width = config.encoder.fine_rff_width;
  field_config.sigma_coarse = config.encoder.sigma_coarse;
  field_config.sigma_fine = config.encoder.sigma_fine;
  field_config.z_width = config.shader.z_width;
  field_config.fine_extrinsic_on_coarse_output =
      config.encoder.fine_extrinsic_on_coarse_output;
  field_config.no_coarse = config.ablation.no_coarse;
  field_config.zero_intrinsic = config.ablation.no_intrinsic;
  field_config.zero_extrinsic = config.ablation.no_extrinsic;
  field_config.seed = config.schedule.seed;

  bundle.selected_basis = selected;
  bundle.locator = locator;
  bundle.field = std::make_shared<fields::DeformationField>(field_config,
                                                            selected, locator);

  render::ShaderConfig shader_config;
  shader_config.z_width = config.shader.z_width;
  shader_config.hidden = config.shader.hidden;
  shader_config.hidden_layers = config.shader.hidden_layers;
  shader_config.view_octaves = config.shader.view_octaves;
  shader_config.normal_octaves = config.shader.normal_octaves;
  shader_config.use_geometry_shader = !config.ablation.no_geometry_shader;
  bundle.shaders = std::make_shared<render::ShaderPair>(
      render::ShaderPair::init(shader_config, config.schedule.seed));
  return bundle;
}

StepPlan plan_step(const scenes::SceneDataset& dataset, const geom::Mesh& mesh,
                   const Mat& positions, const std::vector<int>& view_ids,
                   Real pixel_fraction, const RasterSettings& raster,
                   rng::Engine& pixel_rng) {
  StepPlan plan;
  plan.views.reserve(view_ids.size());
  for (int view : view_ids) {
    ViewPlan vp;
    vp.view = view;
    const render::Camera& cam = dataset.cameras[static_cast<std::size_t>(view)];
    vp.coverage = render::rasterize_coverage(positions, mesh, cam);
    vp.band = render::silhouette_band(vp.coverage, positions, mesh, cam,
                                      raster.band_px);

    const auto& gt_mask = dataset.masks[static_cast<std::size_t>(view)];
    const PixelSample sample =
        sample_pixels(gt_mask, vp.coverage, pixel_fraction, pixel_rng);
    vp.skipped = sample.skipped;
    vp.used_union = sample.used_union;
    vp.sampled_pixels = sample.pixels;

    if (!vp.skipped) {
      const auto& gt_image = dataset.images[static_cast<std::size_t>(view)];
      // Map sampled pixels to covered rows (the covered list is ascending).
      std::vector<Real> gt_rows;
      for (int pix : vp.sampled_pixels) {
        const auto it = std::lower_bound(vp.coverage.covered.begin(),
                                         vp.coverage.covered.end(), pix);
        if (it != vp.coverage.covered.end() && *it == pix) {
          vp.covered_rows.push_back(
              static_cast<int>(it - vp.coverage.covered.begin()));
          for (int c = 0; c < 3; ++c)
            gt_rows.push_back(static_cast<Real>(
                gt_image.data[static_cast<std::size_t>(pix) * 3 + c]));
        } else {
          for (int c = 0; c < 3; ++c)
            vp.uncovered_abs_sum += std::abs(static_cast<double>(
                gt_image.data[static_cast<std::size_t>(pix) * 3 + c]));
        }
      }
      vp.gt_covered.resize(static_cast<Index>(vp.covered_rows.size()), 3);
      for (Index r = 0; r < vp.gt_covered.rows(); ++r)
        for (Index c = 0; c < 3; ++c)
          vp.gt_covered(r, c) = gt_rows[static_cast<std::size_t>(r * 3 + c)];
    }
    plan.views.push_back(std::move(vp));
  }
  return plan;
}

LossBreakdown build_step_loss(const StepPlan& plan,
                              const scenes::SceneDataset& dataset,
                              const geom::Mesh& mesh,
                              const fields::DeformationField::Eval& eval,
                              const render::ShaderPair& shaders,
                              const LossWeights& weights,
                              const RasterSettings& raster) {
  const ad::Tensor face_normals = render::face_normal_tensor(eval.positions, mesh);
  const ad::Tensor vertex_normals =
      render::vertex_normal_tensor(eval.positions, mesh);

  std::vector<ad::Tensor> photometric_terms;
  std::vector<ad::Tensor> mask_terms;
  int active_views = 0;
  for (const ViewPlan& vp : plan.views) {
    if (vp.skipped) continue;
    ++active_views;
    const render::Camera& cam =
        dataset.cameras[static_cast<std::size_t>(vp.view)];

    render::RasterizeOptions options;
    options.coverage = &vp.coverage;
    options.vertex_normals = &vertex_normals;
    const render::GBuffer gbuffer =
        render::rasterize(eval.positions, eval.features, mesh, cam, options);

    const render::ShadeResult shaded =
        render::shade(gbuffer, vp.covered_rows, cam, shaders);
    photometric_terms.push_back(loss_photometric(
        vp.gt_covered, vp.uncovered_abs_sum,
        static_cast<Index>(vp.sampled_pixels.size()), shaded,
        weights.lambda_g));

    const render::SoftMask soft = render::soft_mask(
        eval.positions, mesh, cam, raster.soft_mask_sharpness, vp.band);
    mask_terms.push_back(
        loss_mask(dataset.masks[static_cast<std::size_t>(vp.view)], soft));
  }

  LossBreakdown out;
  if (active_views == 0)
    throw DivergenceError("build_step_loss: every view was skipped");

  auto view_mean = [&](std::vector<ad::Tensor>& terms) {
    ad::Tensor acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return ad::affine(acc, Real(1) / static_cast<Real>(terms.size()), Real(0));
  };

  const ad::Tensor lc = view_mean(photometric_terms);
  const ad::Tensor lm = view_mean(mask_terms);
  const ad::Tensor ln = loss_normal(face_normals, mesh);
  out.photometric = static_cast<double>(lc.value()(0, 0));
  out.mask = static_cast<double>(lm.value()(0, 0));
  out.normal = static_cast<double>(ln.value()(0, 0));

  ad::Tensor total = ad::add(
      ad::add(ad::affine(lc, weights.lambda_c, Real(0)),
              ad::affine(lm, weights.lambda_m, Real(0))),
      ad::affine(ln, weights.lambda_n, Real(0)));
  if (weights.icr_enabled) {
    const ad::Tensor licr = loss_icr(eval.positions, mesh);
    out.icr = static_cast<double>(licr.value()(0, 0));
    total = ad::add(total, ad::affine(licr, weights.lambda_icr, Real(0)));
  }

  const struct {
    const char* name;
    double value;
  } components[] = {{"L_c", out.photometric},
                    {"L_m", out.mask},
                    {"L_n", out.normal},
                    {"L_ICR", out.icr}};
  for (const auto& comp : components)
    if (!std::isfinite(comp.value))
      throw DivergenceError(std::string("non-finite loss component ") +
                            comp.name);

  out.total = total;
  return out;
}

namespace {

std::vector<int> sample_views(int total, int count, rng::Engine& engine) {
  std::vector<int> ids(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) ids[static_cast<std::size_t>(i)] = i;
  const int want = std::min(count, total);
  for (int i = 0; i < want; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng::uniform01(engine) *
                                 static_cast<double>(total - i));
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[std::min(j, ids.size() - 1)]);
  }
  ids.resize(static_cast<std::size_t>(want));
  return ids;
}

void write_metrics_line(std::ofstream& out, long step,
                        const LossBreakdown& loss, double total, double delta,
                        double lr) {
  nlohmann::json record{{"step", step},
                        {"L_c", loss.photometric},
                        {"L_m", loss.mask},
                        {"L_n", loss.normal},
                        {"L_ICR", loss.icr},
                        {"total", total},
                        {"delta", delta},
                        {"lr", lr}};
  out << record.dump() << "\n";
}

}  // namespace

TrainResult train(const scenes::SceneDataset& dataset, TrainConfig config,
                  const std::filesystem::path& out_dir) {
  config.validate();
  dataset.validate();
  if (dataset.view_count() < config.schedule.views_per_step)
    throw ConfigError("train: dataset has fewer views than views_per_step");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path cache_dir = config.cache_dir.empty()
                                 ? out_dir / "cache"
                                 : fs::path(config.cache_dir);
  {
    std::ofstream cfg_out(out_dir / "config.json");
    cfg_out << config.to_json().dump(2) << "\n";
  }

  const auto start_time = std::chrono::steady_clock::now();
  ModelBundle model = build_model(config, cache_dir);
  fields::DeformationField& field = *model.field;
  render::ShaderPair& shaders = *model.shaders;

  rng::Engine view_rng(rng::derive_seed(config.schedule.seed, "views"));
  rng::Engine pixel_rng(rng::derive_seed(config.schedule.seed, "pixels"));

  ad::AdamConfig shader_adam_config;
  shader_adam_config.lr = config.schedule.lr_shader;
  ad::Adam adam_hz(shaders.feature_parameters(), shader_adam_config);
  ad::Adam adam_hg(shaders.geometry_parameters(), shader_adam_config);

  ad::AdamConfig deform_adam_config;
  deform_adam_config.lr = config.schedule.lr_deform;
  std::optional<ad::Adam> adam_coarse;
  if (!config.ablation.no_coarse)
    adam_coarse.emplace(field.coarse_parameters(), deform_adam_config);
  std::optional<ad::Adam> adam_fine;

  const bool no_coarse = config.ablation.no_coarse;
  const long coarse_iters = no_coarse ? 0 : config.schedule.coarse_iters;
  const long total_iters =
      static_cast<long>(config.schedule.coarse_iters) +
      config.schedule.fine_iters;
  fields::DeltaSchedule delta_schedule{coarse_iters,
                                       config.schedule.delta_ramp_iters,
                                       config.schedule.delta_max};

  const geom::Mesh coarse_mesh =
      geom::icosphere(config.schedule.coarse_mesh_level);
  const geom::Mesh fine_mesh = geom::icosphere(config.schedule.fine_mesh_level);

  std::ofstream metrics(out_dir / "metrics.jsonl");
  if (!metrics) throw IoError("train: cannot write metrics under " +
                              out_dir.string());

  TrainResult result;
  result.fine_domain = fine_mesh;
  result.metrics_path = out_dir / "metrics.jsonl";

  long divergence_streak = 0;
  long skipped_views_logged = 0;
  double current_delta = 0;

  auto save_state = [&](const fs::path& path, long iteration) {
    io::save_training_checkpoint(path, config, field, shaders, adam_coarse,
                                 adam_fine, view_rng, pixel_rng, iteration,
                                 current_delta);
  };

  for (long iter = 0; iter < total_iters; ++iter) {
    const bool fine_stage = iter >= coarse_iters;
    if (fine_stage && iter == coarse_iters) {
      // Refinement boundary: subdivide, freeze the coarse net, introduce the
      // fine net with the decayed deformation lr.
      field.freeze_coarse();
      deform_adam_config.lr =
          config.schedule.lr_deform * config.schedule.lr_decay_at_refine;
      adam_fine.emplace(field.fine_parameters(), deform_adam_config);
    }
    const geom::Mesh& mesh = fine_stage ? fine_mesh : coarse_mesh;
    current_delta = static_cast<double>(delta_schedule.at(iter));

    // Forward: tape evaluation of the deformed mesh.
    fields::DeformationField::Eval eval;
    if (fine_stage) {
      eval = field.deform_mesh(mesh, static_cast<Real>(current_delta));
    } else {
      eval.positions = field.deform_coarse(mesh.vertex_matrix());
      eval.features = ad::Tensor::constant(
          Mat::Zero(mesh.vertex_count(), config.shader.z_width));
    }
    ad::check_finite(eval.positions, "deformed positions");

    const std::vector<int> views = sample_views(
        dataset.view_count(), config.schedule.views_per_step, view_rng);
    const StepPlan plan =
        plan_step(dataset, mesh, eval.positions.value(), views,
                  config.schedule.pixel_fraction, config.raster, pixel_rng);
    for (const ViewPlan& vp : plan.views)
      if ((vp.skipped || vp.used_union || vp.coverage.empty()) &&
          skipped_views_logged < 20) {
        std::cerr << "[train] step " << iter << " view " << vp.view
                  << (vp.skipped ? " skipped (no mask overlap)"
                                 : vp.coverage.empty()
                                       ? " has empty coverage"
                                       : " used union fallback")
                  << "\n";
        ++skipped_views_logged;
      }

    LossBreakdown loss;
    try {
      loss = build_step_loss(plan, dataset, mesh, eval, shaders,
                             config.weights, config.raster);
    } catch (const DivergenceError& e) {
      save_state(out_dir / "diverged.ckpt", iter);
      throw DivergenceError(std::string(e.what()) + " at step " +
                            std::to_string(iter) + " (state dumped)");
    }
    const double total_value =
        static_cast<double>(loss.total.value()(0, 0));

    if (!std::isfinite(total_value) || total_value > 1e3) {
      if (!std::isfinite(total_value) || ++divergence_streak >= 50) {
        save_state(out_dir / "diverged.ckpt", iter);
        throw DivergenceError("training diverged at step " +
                              std::to_string(iter) + " (total = " +
                              std::to_string(total_value) + ")");
      }
    } else {
      divergence_streak = 0;
    }

    ad::backward(loss.total);
    if (fine_stage) {
      adam_fine->step();
      adam_fine->zero_grad();
    } else {
      adam_coarse->step();
      adam_coarse->zero_grad();
    }
    adam_hz.step();
    adam_hz.zero_grad();
    if (!config.ablation.no_geometry_shader) {
      adam_hg.step();
      adam_hg.zero_grad();
    }

    write_metrics_line(metrics, iter, loss, total_value, current_delta,
                       static_cast<double>(fine_stage
                                               ? deform_adam_config.lr
                                               : config.schedule.lr_deform));
    result.final_loss = total_value;

    if (config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0)
      save_state(out_dir / ("step_" + std::to_string(iter + 1) + ".ckpt"),
                 iter + 1);
    if (config.preview_every > 0 && (iter + 1) % config.preview_every == 0) {
      fs::create_directories(out_dir / "previews");
      const render::Camera& cam = dataset.cameras[0];
      const render::GBuffer gbuffer = render::rasterize(
          ad::Tensor::constant(eval.positions.value()),
          ad::Tensor::constant(eval.features.value()), mesh, cam);
      std::vector<int> all_rows(gbuffer.coverage.covered.size());
      for (std::size_t i = 0; i < all_rows.size(); ++i)
        all_rows[i] = static_cast<int>(i);
      const render::ShadeResult shaded = render::shade(gbuffer, all_rows, cam, shaders);
      gbuffer.to_image(shaded.final.value())
          .save_png(out_dir / "previews" /
                    ("step_" + std::to_string(iter + 1) + ".png"));
    }
  }

  metrics.close();
  result.steps = total_iters;
  result.checkpoint_path = out_dir / "final.ckpt";
  save_state(result.checkpoint_path, total_iters);
  result.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start_time)
                            .count();
  {
    std::ofstream meta(out_dir / "run_meta.json");
    meta << nlohmann::json{{"wall_seconds", result.wall_seconds},
                           {"steps", result.steps},
                           {"final_loss", result.final_loss}}
                .dump(2)
         << "\n";
  }
  result.model = std::move(model);
  return result;
}

}  // namespace defsurf::train
