#pragma once

#include <filesystem>
#include <vector>

#include "defsurf/render/camera.hpp"
#include "defsurf/render/image.hpp"
#include "defsurf/scenes/shapes.hpp"

namespace defsurf::scenes {

// Posed RGB images with binary masks, cameras, and a dense ground-truth
// surface sample for Chamfer evaluation.
struct SceneDataset {
  std::vector<render::ImageBuffer> images;  // float RGB
  std::vector<render::ImageBuffer> masks;   // float, values in {0, 1}
  std::vector<render::Camera> cameras;
  Mat gt_points;  // N x 3
  nlohmann::json meta;

  int view_count() const { return static_cast<int>(images.size()); }
  void validate() const;
};

// `n` cameras distributed over the elevation rings, all aimed at the
// origin, shared intrinsics.
std::vector<render::Camera> camera_ring(int n, Real radius,
                                        const std::vector<Real>& elevations_deg,
                                        int width, int height);

struct GroundTruthOptions {
  Index gt_samples = 20000;
  std::uint64_t seed = 7;
  int ray_steps = 256;       // bracketing march before bisection
  Real bisect_tol = Real(1e-7);
};

// Ray-casts the analytic shape at pixel centers (bisection on the radial
// implicit along each ray), shades with a Lambertian directional light and
// the procedural albedo, and samples gt points uniformly by area.
SceneDataset render_ground_truth(const TargetShape& shape,
                                 const std::vector<render::Camera>& cameras,
                                 const SceneLight& light,
                                 const AlbedoField& albedo,
                                 const GroundTruthOptions& options = {});

// Directory layout: images/view_###.f32 (+ .png previews),
// masks/view_###.f32, cameras.json, gt_points.f32, meta.json.
void save_dataset(const SceneDataset& dataset,
                  const std::filesystem::path& dir);
SceneDataset load_dataset(const std::filesystem::path& dir);

}  // namespace defsurf::scenes
