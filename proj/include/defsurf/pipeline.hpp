#pragma once

#include <filesystem>

#include "defsurf/io/checkpoint.hpp"
#include "defsurf/scenes/dataset.hpp"

namespace defsurf::pipeline {

struct GenSceneArgs {
  scenes::TargetShape shape;
  int views = 24;
  int resolution = 128;
  Real ring_radius = Real(3);
  std::vector<Real> elevations_deg{Real(20), Real(45)};
  Real albedo_frequency = Real(3);
  std::uint64_t seed = 7;
  std::filesystem::path out_dir;
};

// Renders and persists a synthetic dataset; returns summary JSON.
nlohmann::json gen_scene(const GenSceneArgs& args);

struct TrainArgs {
  std::filesystem::path dataset_dir;
  std::filesystem::path config_path;  // optional; defaults when empty
  std::filesystem::path out_dir;
  // Overrides applied after the config file is read.
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string ablation_preset;  // "", "no-intrinsic", "no-extrinsic",
                                // "no-coarse", "no-hg"
  std::optional<double> lambda_g;
  std::optional<bool> icr;
};

nlohmann::json run_train(const TrainArgs& args);

struct ExtractArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path out_obj;
  int tri_level = -1;  // one of tri_level / quad_n must be set
  int quad_n = -1;
  std::filesystem::path cache_dir;
};

// Writes the OBJ and returns vertex/face counts, the ICR report (average and
// percent below 0.10/0.25/0.90), and the extraction wall time.
nlohmann::json run_extract(const ExtractArgs& args);

struct EvalArgs {
  std::filesystem::path checkpoint;  // or an OBJ mesh
  std::filesystem::path mesh_obj;
  std::filesystem::path dataset_dir;
  int tri_level = 5;  // extraction resolution when evaluating a checkpoint
  Index surface_samples = 10000;
  std::uint64_t seed = 99;
  std::filesystem::path cache_dir;
};

// Chamfer-L1 against the dataset gt points, ICR stats, and per-view PSNR of
// re-renders (PSNR requires a checkpoint; mesh-only evaluation is geometric).
nlohmann::json run_eval(const EvalArgs& args);

struct RenderArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path out_png;
  std::filesystem::path dataset_dir;  // when set with view >= 0, use that pose
  int view = -1;
  // Synthesized pose when no dataset view is given.
  Real azimuth_deg = Real(30);
  Real elevation_deg = Real(25);
  Real radius = Real(3);
  int resolution = 256;
  int tri_level = 5;
  std::filesystem::path cache_dir;
};

// Writes the shaded image and a normal map (RGB = (n+1)/2); reports PSNR
// against the matching dataset image when a view is given.
nlohmann::json run_render(const RenderArgs& args);

}  // namespace defsurf::pipeline
