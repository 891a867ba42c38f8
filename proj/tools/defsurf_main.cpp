// defsurf: multi-view surface reconstruction with a neural deformation
// field over a sphere domain.
//
// Subcommands: gen-scene | train | extract | eval | render
// Exit codes: 0 ok, 2 usage, 3 divergence, 4 I/O.

#include <CLI11.hpp>

#include <iostream>

#include "defsurf/pipeline.hpp"

namespace {

int dispatch(int argc, char** argv) {
  CLI::App app{"neural deformation-field surface reconstruction"};
  app.require_subcommand(1);

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "render a synthetic dataset");
  std::string shape_name = "ellipsoid";
  defsurf::pipeline::GenSceneArgs gen_args;
  std::vector<double> radii{0.9, 0.6, 0.6};
  double bump_amp = 0.08;
  int bump_freq = 6;
  double albedo_freq = 3.0;
  std::string gen_out;
  gen->add_option("--shape", shape_name, "ellipsoid | bumpy | box");
  gen->add_option("--views", gen_args.views, "camera count (>= 6)");
  gen->add_option("--res", gen_args.resolution, "image resolution");
  gen->add_option("--a", radii[0], "ellipsoid semi-axis a");
  gen->add_option("--b", radii[1], "ellipsoid semi-axis b");
  gen->add_option("--c", radii[2], "ellipsoid semi-axis c");
  gen->add_option("--bump-amplitude", bump_amp, "bumpy sphere amplitude");
  gen->add_option("--bump-frequency", bump_freq, "bumpy sphere frequency");
  gen->add_option("--albedo-frequency", albedo_freq,
                  "procedural albedo frequency (high values for the "
                  "intrinsic ablation scene)");
  gen->add_option("--seed", gen_args.seed, "rng seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "optimize the deformation field");
  defsurf::pipeline::TrainArgs train_args;
  std::string train_data, train_config, train_out, ablate;
  std::uint64_t train_seed = 0;
  int threads = -1;
  double lambda_g = -1;
  bool icr_flag = false;
  tr->add_option("--data", train_data, "dataset directory")->required();
  tr->add_option("--config", train_config, "config JSON path");
  tr->add_option("--out", train_out, "run output directory")->required();
  tr->add_option("--seed", train_seed, "override the config seed");
  tr->add_option("--threads", threads, "worker threads (1 = deterministic)");
  tr->add_option("--ablate", ablate,
                 "preset: no-intrinsic | no-extrinsic | no-coarse | no-hg");
  tr->add_option("--lambda-g", lambda_g, "geometry shader loss weight");
  tr->add_flag("--icr", icr_flag, "enable the triangle-quality loss");

  // extract
  auto* ex = app.add_subcommand("extract", "extract a mesh from a checkpoint");
  defsurf::pipeline::ExtractArgs extract_args;
  std::string ckpt, out_obj, extract_cache;
  ex->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  ex->add_option("--tri-level", extract_args.tri_level,
                 "icosphere subdivision level");
  ex->add_option("--quad", extract_args.quad_n, "quad sphere resolution n");
  ex->add_option("--out", out_obj, "output OBJ path")->required();
  ex->add_option("--cache", extract_cache, "eigenbasis cache directory");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate against a dataset");
  defsurf::pipeline::EvalArgs eval_args;
  std::string eval_ckpt, eval_obj, eval_data, eval_cache;
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint path");
  ev->add_option("--obj", eval_obj, "mesh OBJ path (geometric eval only)");
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--tri-level", eval_args.tri_level, "extraction level");
  ev->add_option("--samples", eval_args.surface_samples, "surface samples");
  ev->add_option("--seed", eval_args.seed, "sampling seed");
  ev->add_option("--cache", eval_cache, "eigenbasis cache directory");

  // render
  auto* re = app.add_subcommand("render", "render a pose from a checkpoint");
  defsurf::pipeline::RenderArgs render_args;
  std::string render_ckpt, render_png, render_data, render_cache;
  double azimuth = 30, elevation = 25, radius = 3;
  re->add_option("--checkpoint", render_ckpt, "checkpoint path")->required();
  re->add_option("--out", render_png, "output PNG path")->required();
  re->add_option("--data", render_data, "dataset directory (for --view)");
  re->add_option("--view", render_args.view, "dataset view index");
  re->add_option("--azimuth", azimuth, "pose azimuth (degrees)");
  re->add_option("--elevation", elevation, "pose elevation (degrees)");
  re->add_option("--radius", radius, "pose distance");
  re->add_option("--res", render_args.resolution, "image resolution");
  re->add_option("--tri-level", render_args.tri_level, "mesh level");
  re->add_option("--cache", render_cache, "eigenbasis cache directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  nlohmann::json result;
  if (gen->parsed()) {
    gen_args.shape = defsurf::scenes::TargetShape::from_name(shape_name);
    gen_args.shape.radii = defsurf::Vec3(
        static_cast<defsurf::Real>(radii[0]),
        static_cast<defsurf::Real>(radii[1]),
        static_cast<defsurf::Real>(radii[2]));
    gen_args.shape.bump_amplitude = static_cast<defsurf::Real>(bump_amp);
    gen_args.shape.bump_frequency = bump_freq;
    gen_args.albedo_frequency = static_cast<defsurf::Real>(albedo_freq);
    gen_args.out_dir = gen_out;
    gen_args.shape.validate();
    result = defsurf::pipeline::gen_scene(gen_args);
  } else if (tr->parsed()) {
    train_args.dataset_dir = train_data;
    train_args.config_path = train_config;
    train_args.out_dir = train_out;
    if (tr->count("--seed") > 0) train_args.seed = train_seed;
    if (threads >= 0) train_args.threads = threads;
    train_args.ablation_preset = ablate;
    if (lambda_g >= 0) train_args.lambda_g = lambda_g;
    if (icr_flag) train_args.icr = true;
    result = defsurf::pipeline::run_train(train_args);
  } else if (ex->parsed()) {
    extract_args.checkpoint = ckpt;
    extract_args.out_obj = out_obj;
    extract_args.cache_dir = extract_cache;
    result = defsurf::pipeline::run_extract(extract_args);
    if (result.contains("icr")) {
      const auto& icr = result["icr"];
      std::cerr << "ICR report: average " << icr["average"] << ", %<0.10 "
                << icr["pct_below_0.10"] << ", %<0.25 "
                << icr["pct_below_0.25"] << ", %<0.90 "
                << icr["pct_below_0.90"] << "\n";
    }
  } else if (ev->parsed()) {
    eval_args.checkpoint = eval_ckpt;
    eval_args.mesh_obj = eval_obj;
    eval_args.dataset_dir = eval_data;
    eval_args.cache_dir = eval_cache;
    if (eval_ckpt.empty() && eval_obj.empty())
      throw defsurf::ArgumentError("eval: need --checkpoint or --obj");
    result = defsurf::pipeline::run_eval(eval_args);
  } else if (re->parsed()) {
    render_args.checkpoint = render_ckpt;
    render_args.out_png = render_png;
    render_args.dataset_dir = render_data;
    render_args.azimuth_deg = static_cast<defsurf::Real>(azimuth);
    render_args.elevation_deg = static_cast<defsurf::Real>(elevation);
    render_args.radius = static_cast<defsurf::Real>(radius);
    render_args.cache_dir = render_cache;
    result = defsurf::pipeline::run_render(render_args);
  }

  std::cout << result.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const defsurf::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const defsurf::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const defsurf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const defsurf::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const defsurf::VersionError& e) {
    std::cerr << "version error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
