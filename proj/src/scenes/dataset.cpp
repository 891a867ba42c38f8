#include "defsurf/scenes/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace defsurf::scenes {

void SceneDataset::validate() const {
  if (images.size() != masks.size() || images.size() != cameras.size())
    throw ConfigError("SceneDataset: image/mask/camera counts differ");
  for (const auto& mask : masks)
    for (float v : mask.data)
      if (v != 0.0f && v != 1.0f)
        throw ConfigError("SceneDataset: masks must be binary");
  if (gt_points.rows() > 0 && gt_points.rows() < 10000)
    throw ConfigError("SceneDataset: gt_points must have >= 1e4 samples");
}

std::vector<render::Camera> camera_ring(int n, Real radius,
                                        const std::vector<Real>& elevations_deg,
                                        int width, int height) {
  if (n < 6) throw ArgumentError("camera_ring: need at least 6 cameras");
  if (elevations_deg.empty())
    throw ArgumentError("camera_ring: need at least one elevation");

  const int rings = static_cast<int>(elevations_deg.size());
  std::vector<int> per_ring(static_cast<std::size_t>(rings), n / rings);
  for (int i = 0; i < n % rings; ++i) ++per_ring[static_cast<std::size_t>(i)];

  // Focal chosen so the unit ball spans roughly 80% of the image width.
  const Real focal = Real(0.4) * static_cast<Real>(width) * radius;

  std::vector<render::Camera> cameras;
  cameras.reserve(static_cast<std::size_t>(n));
  for (int ring = 0; ring < rings; ++ring) {
    const Real elevation =
        elevations_deg[static_cast<std::size_t>(ring)] * kPi / Real(180);
    const int count = per_ring[static_cast<std::size_t>(ring)];
    // Stagger rings so cameras do not stack in azimuth.
    const Real offset = Real(ring) * kPi / Real(std::max(count, 1));
    for (int i = 0; i < count; ++i) {
      const Real azimuth =
          offset + Real(2) * kPi * static_cast<Real>(i) / Real(count);
      cameras.push_back(render::look_at_origin(radius, azimuth, elevation,
                                               focal, width, height));
    }
  }
  return cameras;
}

namespace {

// First boundary crossing along the ray, if any: fixed-step bracketing of
// F(s) = |p(s)| - rho(p(s)/|p(s)|), then bisection.
bool cast_ray(const TargetShape& shape, const Vec3& origin, const Vec3& dir,
              Real bound_radius, int steps, Real tol, Vec3* hit) {
  // Intersect the bounding sphere to limit the march.
  const Real b = origin.dot(dir);
  const Real c = origin.squaredNorm() - bound_radius * bound_radius;
  const Real disc = b * b - c;
  if (disc <= Real(0)) return false;
  const Real sqrt_disc = std::sqrt(disc);
  const Real s0 = std::max(-b - sqrt_disc, Real(0));
  const Real s1 = -b + sqrt_disc;
  if (s1 <= s0) return false;

  auto implicit_f = [&](Real s) {
    const Vec3 p = origin + s * dir;
    const Real r = p.norm();
    if (r == Real(0)) return -shape.radial(Vec3(1, 0, 0));
    return r - shape.radial(p / r);
  };

  const Real step = (s1 - s0) / static_cast<Real>(steps);
  Real prev_s = s0;
  Real prev_f = implicit_f(prev_s);
  if (prev_f <= Real(0)) {  // camera inside the shape: treat as no hit
    return false;
  }
  for (int i = 1; i <= steps; ++i) {
    const Real s = s0 + step * static_cast<Real>(i);
    const Real f = implicit_f(s);
    if (f <= Real(0)) {
      Real lo = prev_s, hi = s;
      while (hi - lo > tol) {
        const Real mid = Real(0.5) * (lo + hi);
        if (implicit_f(mid) <= Real(0))
          hi = mid;
        else
          lo = mid;
      }
      *hit = origin + (Real(0.5) * (lo + hi)) * dir;
      return true;
    }
    prev_s = s;
    prev_f = f;
  }
  return false;
}

Mat sample_gt_points(const TargetShape& shape, Index count,
                     std::uint64_t seed) {
  // Uniform-by-area rejection on the radial parameterization: the area
  // element of the graph r = rho(w) is rho * sqrt(rho^2 + |grad_S rho|^2).
  rng::Engine engine(seed);
  rng::NormalSampler normal;

  auto random_direction = [&]() {
    Vec3 d;
    do {
      d = Vec3(static_cast<Real>(normal(engine)),
               static_cast<Real>(normal(engine)),
               static_cast<Real>(normal(engine)));
    } while (d.squaredNorm() < Real(1e-12));
    return Vec3(d.normalized());
  };

  auto area_weight = [&](const Vec3& d) {
    const Real rho = shape.radial(d);
    // Tangent-plane central differences of rho.
    Vec3 t1 = d.cross(Vec3(1, 0, 0));
    if (t1.squaredNorm() < Real(1e-6)) t1 = d.cross(Vec3(0, 1, 0));
    t1.normalize();
    const Vec3 t2 = d.cross(t1).normalized();
    const Real h = Real(1e-5);
    const Real g1 = (shape.radial((d + h * t1).normalized()) -
                     shape.radial((d - h * t1).normalized())) /
                    (Real(2) * h);
    const Real g2 = (shape.radial((d + h * t2).normalized()) -
                     shape.radial((d - h * t2).normalized())) /
                    (Real(2) * h);
    return rho * std::sqrt(rho * rho + g1 * g1 + g2 * g2);
  };

  // Estimate the maximum weight with a sweep, then add margin.
  Real max_weight = Real(0);
  for (int i = 0; i < 4096; ++i)
    max_weight = std::max(max_weight, area_weight(random_direction()));
  max_weight *= Real(1.15);

  Mat points(count, 3);
  Index accepted = 0;
  while (accepted < count) {
    const Vec3 d = random_direction();
    const Real u = static_cast<Real>(rng::uniform01(engine));
    if (u * max_weight <= area_weight(d)) {
      points.row(accepted) = shape.surface_point(d).transpose();
      ++accepted;
    }
  }
  return points;
}

}  // namespace

SceneDataset render_ground_truth(const TargetShape& shape,
                                 const std::vector<render::Camera>& cameras,
                                 const SceneLight& light,
                                 const AlbedoField& albedo,
                                 const GroundTruthOptions& options) {
  shape.validate();
  const Real bound = shape.bounding_radius() * Real(1.05);

  SceneDataset ds;
  ds.images.resize(cameras.size());
  ds.masks.resize(cameras.size());
  ds.cameras = cameras;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long vi = 0; vi < static_cast<long>(cameras.size()); ++vi) {
    const render::Camera& cam = cameras[static_cast<std::size_t>(vi)];
    render::ImageBuffer image(cam.width, cam.height, 3);
    render::ImageBuffer mask(cam.width, cam.height, 1);
    const Vec3 origin = cam.center();
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Vec3 dir = cam.pixel_ray(static_cast<Real>(x) + Real(0.5),
                                       static_cast<Real>(y) + Real(0.5));
        Vec3 hit;
        if (!cast_ray(shape, origin, dir, bound, options.ray_steps,
                      options.bisect_tol, &hit))
          continue;
        mask.at(x, y, 0) = 1.0f;
        const Vec3 n = shape.surface_normal(hit);
        const Real lambert = std::max(Real(0), n.dot(light.toward_light));
        const Vec3 color = albedo.at(hit.normalized()) * lambert;
        for (int ch = 0; ch < 3; ++ch)
          image.at(x, y, ch) = static_cast<float>(color[ch]);
      }
    ds.images[static_cast<std::size_t>(vi)] = std::move(image);
    ds.masks[static_cast<std::size_t>(vi)] = std::move(mask);
  }

  ds.gt_points = sample_gt_points(shape, options.gt_samples, options.seed);
  ds.meta = nlohmann::json{
      {"shape", shape.to_json()},
      {"light", {static_cast<double>(light.toward_light.x()),
                 static_cast<double>(light.toward_light.y()),
                 static_cast<double>(light.toward_light.z())}},
      {"albedo_frequency", static_cast<double>(albedo.frequency)},
      {"seed", options.seed},
      {"version", 1}};
  ds.validate();
  return ds;
}

namespace {

std::string view_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d.%s", index, ext);
  return buf;
}

}  // namespace

void save_dataset(const SceneDataset& dataset,
                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  for (int i = 0; i < dataset.view_count(); ++i) {
    const auto& image = dataset.images[static_cast<std::size_t>(i)];
    image.save_f32(dir / "images" / view_name(i, "f32"));
    image.save_png(dir / "images" / view_name(i, "png"));
    dataset.masks[static_cast<std::size_t>(i)].save_f32(
        dir / "masks" / view_name(i, "f32"));
  }

  nlohmann::json cams = nlohmann::json::array();
  for (const auto& cam : dataset.cameras) cams.push_back(cam.to_json());
  std::ofstream(dir / "cameras.json") << cams.dump(2) << "\n";

  render::ImageBuffer gt(static_cast<int>(dataset.gt_points.rows()), 1, 3);
  for (Index i = 0; i < dataset.gt_points.rows(); ++i)
    for (int c = 0; c < 3; ++c)
      gt.data[static_cast<std::size_t>(i) * 3 + c] =
          static_cast<float>(dataset.gt_points(i, c));
  gt.save_f32(dir / "gt_points.f32");

  std::ofstream(dir / "meta.json") << dataset.meta.dump(2) << "\n";
}

SceneDataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SceneDataset ds;

  const fs::path cam_path = dir / "cameras.json";
  std::ifstream cam_stream(cam_path);
  if (!cam_stream) throw IoError("load_dataset: missing " + cam_path.string());
  nlohmann::json cams;
  try {
    cam_stream >> cams;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_dataset: corrupt " + cam_path.string() + ": " +
                  e.what());
  }
  for (const auto& j : cams) ds.cameras.push_back(render::Camera::from_json(j));

  for (std::size_t i = 0; i < ds.cameras.size(); ++i) {
    const fs::path image_path =
        dir / "images" / view_name(static_cast<int>(i), "f32");
    const fs::path mask_path =
        dir / "masks" / view_name(static_cast<int>(i), "f32");
    ds.images.push_back(render::ImageBuffer::load_f32(image_path));
    ds.masks.push_back(render::ImageBuffer::load_f32(mask_path));
  }

  const fs::path gt_path = dir / "gt_points.f32";
  if (fs::exists(gt_path)) {
    const render::ImageBuffer gt = render::ImageBuffer::load_f32(gt_path);
    ds.gt_points.resize(gt.width, 3);
    for (Index i = 0; i < ds.gt_points.rows(); ++i)
      for (int c = 0; c < 3; ++c)
        ds.gt_points(i, c) =
            static_cast<Real>(gt.data[static_cast<std::size_t>(i) * 3 + c]);
  }

  const fs::path meta_path = dir / "meta.json";
  std::ifstream meta_stream(meta_path);
  if (!meta_stream)
    throw IoError("load_dataset: missing " + meta_path.string());
  try {
    meta_stream >> ds.meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_dataset: corrupt " + meta_path.string() + ": " +
                  e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace defsurf::scenes
