#include "defsurf/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "defsurf/geometry/chamfer.hpp"
#include "defsurf/geometry/obj_io.hpp"
#include "defsurf/geometry/quality.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace defsurf::pipeline {

namespace {

void apply_threads(int threads) {
  if (threads > 0) {
    Eigen::setNbThreads(threads);
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
  }
}

nlohmann::json icr_json(const geom::IcrStats& stats) {
  return {{"average", stats.average},
          {"pct_below_0.10", stats.pct_below_010},
          {"pct_below_0.25", stats.pct_below_025},
          {"pct_below_0.90", stats.pct_below_090},
          {"faces", stats.face_count}};
}

// Full-frame shading of one pose with the loaded model.
struct RenderedView {
  render::ImageBuffer image;   // final (geometry shader) RGB
  render::ImageBuffer normals; // RGB = (n+1)/2
  render::ImageBuffer mask;
};

RenderedView render_view(const io::LoadedModel& loaded, const geom::Mesh& domain,
                         const render::Camera& camera) {
  const fields::DeformationField& field = *loaded.model.field;
  const fields::DeformationField::Eval eval =
      field.deform_mesh(domain, static_cast<Real>(loaded.delta));
  const ad::Tensor positions = ad::Tensor::constant(eval.positions.value());
  const ad::Tensor features = ad::Tensor::constant(eval.features.value());

  const render::GBuffer gbuffer =
      render::rasterize(positions, features, domain, camera);
  std::vector<int> all_rows(gbuffer.coverage.covered.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i)
    all_rows[i] = static_cast<int>(i);

  RenderedView out;
  if (!all_rows.empty()) {
    const render::ShadeResult shaded =
        render::shade(gbuffer, all_rows, camera, *loaded.model.shaders);
    out.image = gbuffer.to_image(shaded.final.value());
    const Mat encoded_normals =
        ((gbuffer.normal.value().array() + Real(1)) * Real(0.5)).matrix();
    out.normals = gbuffer.to_image(encoded_normals);
  } else {
    out.image = render::ImageBuffer(camera.width, camera.height, 3);
    out.normals = render::ImageBuffer(camera.width, camera.height, 3);
  }
  out.mask = gbuffer.coverage.hard_mask();
  return out;
}

double psnr(const render::ImageBuffer& a, const render::ImageBuffer& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ArgumentError("psnr: image size mismatch");
  double mse = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

nlohmann::json gen_scene(const GenSceneArgs& args) {
  args.shape.validate();
  const std::vector<render::Camera> cameras = scenes::camera_ring(
      args.views, args.ring_radius, args.elevations_deg, args.resolution,
      args.resolution);
  scenes::SceneLight light;
  scenes::AlbedoField albedo;
  albedo.frequency = args.albedo_frequency;
  scenes::GroundTruthOptions options;
  options.seed = args.seed;
  const scenes::SceneDataset dataset =
      scenes::render_ground_truth(args.shape, cameras, light, albedo, options);
  scenes::save_dataset(dataset, args.out_dir);
  return {{"views", dataset.view_count()},
          {"resolution", args.resolution},
          {"gt_points", static_cast<long>(dataset.gt_points.rows())},
          {"out_dir", args.out_dir.string()}};
}

nlohmann::json run_train(const TrainArgs& args) {
  train::TrainConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError("train: cannot open config " +
                           args.config_path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("train: invalid config JSON: " + std::string(e.what()));
    }
    config = train::TrainConfig::from_json(j);
  }
  if (args.seed) config.schedule.seed = *args.seed;
  if (args.threads) config.threads = *args.threads;
  if (args.lambda_g) config.weights.lambda_g = static_cast<Real>(*args.lambda_g);
  if (args.icr) config.weights.icr_enabled = *args.icr;

  if (!args.ablation_preset.empty()) {
    if (args.ablation_preset == "no-intrinsic")
      config.ablation.no_intrinsic = true;
    else if (args.ablation_preset == "no-extrinsic")
      config.ablation.no_extrinsic = true;
    else if (args.ablation_preset == "no-coarse")
      config.ablation.no_coarse = true;
    else if (args.ablation_preset == "no-hg") {
      config.ablation.no_geometry_shader = true;
      config.weights.lambda_g = Real(0);
    } else {
      throw ArgumentError(
          "train: unknown ablation preset '" + args.ablation_preset +
          "' (valid: no-intrinsic, no-extrinsic, no-coarse, no-hg)");
    }
  }

  apply_threads(config.threads);
  const scenes::SceneDataset dataset = scenes::load_dataset(args.dataset_dir);
  const train::TrainResult result = train::train(dataset, config, args.out_dir);
  return {{"steps", result.steps},
          {"wall_seconds", result.wall_seconds},
          {"final_loss", result.final_loss},
          {"checkpoint", result.checkpoint_path.string()},
          {"metrics", result.metrics_path.string()}};
}

nlohmann::json run_extract(const ExtractArgs& args) {
  if ((args.tri_level < 0) == (args.quad_n < 0))
    throw ArgumentError("extract: set exactly one of tri_level / quad_n");
  const io::LoadedModel loaded = io::load_model(args.checkpoint, args.cache_dir);

  const geom::Mesh domain = args.tri_level >= 0
                                ? geom::icosphere(args.tri_level)
                                : geom::quad_sphere(args.quad_n);
  const auto start = std::chrono::steady_clock::now();
  const geom::Mesh mesh = loaded.model.field->extract_mesh(
      domain, static_cast<Real>(loaded.delta));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  if (!args.out_obj.empty()) geom::export_obj(mesh, args.out_obj);

  nlohmann::json j{{"vertices", static_cast<long>(mesh.vertex_count())},
                   {"faces", static_cast<long>(mesh.face_count())},
                   {"euler_characteristic", mesh.euler_characteristic()},
                   {"watertight",
                    mesh.is_closed() && mesh.is_consistently_oriented()},
                   {"extract_seconds", seconds},
                   {"obj", args.out_obj.string()}};
  if (args.tri_level >= 0) j["icr"] = icr_json(geom::icr_stats(mesh));
  return j;
}

nlohmann::json run_eval(const EvalArgs& args) {
  nlohmann::json result;
  std::optional<io::LoadedModel> loaded;
  geom::Mesh mesh;
  if (!args.mesh_obj.empty()) {
    mesh = geom::import_obj(args.mesh_obj);
  } else {
    loaded = io::load_model(args.checkpoint, args.cache_dir);
    mesh = loaded->model.field->extract_mesh(geom::icosphere(args.tri_level),
                                             static_cast<Real>(loaded->delta));
  }
  result["vertices"] = static_cast<long>(mesh.vertex_count());
  result["faces"] = static_cast<long>(mesh.face_count());
  result["icr"] = icr_json(geom::icr_stats(mesh));

  const scenes::SceneDataset dataset = scenes::load_dataset(args.dataset_dir);
  if (dataset.gt_points.rows() > 0) {
    const Mat samples =
        geom::sample_surface_points(mesh, args.surface_samples, args.seed);
    result["chamfer_l1"] =
        static_cast<double>(geom::chamfer_l1(samples, dataset.gt_points));
    result["surface_samples"] = static_cast<long>(args.surface_samples);
  } else {
    std::cerr << "[eval] dataset has no gt points; geometric metrics "
                 "restricted to ICR\n";
    result["chamfer_l1"] = nullptr;
  }

  if (loaded) {
    const geom::Mesh domain = geom::icosphere(args.tri_level);
    nlohmann::json per_view = nlohmann::json::array();
    double psnr_sum = 0;
    for (int v = 0; v < dataset.view_count(); ++v) {
      const RenderedView rendered = render_view(
          *loaded, domain, dataset.cameras[static_cast<std::size_t>(v)]);
      const double value =
          psnr(rendered.image, dataset.images[static_cast<std::size_t>(v)]);
      per_view.push_back(value);
      psnr_sum += value;
    }
    result["psnr_per_view"] = per_view;
    result["psnr_mean"] = psnr_sum / std::max(1, dataset.view_count());
  }
  return result;
}

nlohmann::json run_render(const RenderArgs& args) {
  const io::LoadedModel loaded = io::load_model(args.checkpoint, args.cache_dir);
  const geom::Mesh domain = geom::icosphere(args.tri_level);

  render::Camera camera;
  std::optional<render::ImageBuffer> reference;
  if (!args.dataset_dir.empty() && args.view >= 0) {
    const scenes::SceneDataset dataset = scenes::load_dataset(args.dataset_dir);
    if (args.view >= dataset.view_count())
      throw ArgumentError("render: view index out of range");
    camera = dataset.cameras[static_cast<std::size_t>(args.view)];
    reference = dataset.images[static_cast<std::size_t>(args.view)];
  } else {
    camera = render::look_at_origin(
        args.radius, args.azimuth_deg * kPi / Real(180),
        args.elevation_deg * kPi / Real(180),
        Real(0.4) * static_cast<Real>(args.resolution) * args.radius,
        args.resolution, args.resolution);
  }

  const RenderedView rendered = render_view(loaded, domain, camera);
  rendered.image.save_png(args.out_png);
  std::filesystem::path normal_path = args.out_png;
  normal_path.replace_extension();
  normal_path += "_normals.png";
  rendered.normals.save_png(normal_path);

  nlohmann::json j{{"image", args.out_png.string()},
                   {"normal_map", normal_path.string()},
                   {"width", camera.width},
                   {"height", camera.height}};
  if (reference) j["psnr"] = psnr(rendered.image, *reference);
  return j;
}

}  // namespace defsurf::pipeline
