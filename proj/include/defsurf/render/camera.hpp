#pragma once

#include <json.hpp>

#include "defsurf/common.hpp"

namespace defsurf::render {

// Pinhole camera: intrinsics K (pixels), world-to-camera rotation R and
// translation t, and the target resolution. R must be orthonormal within
// 1e-9 and the focal lengths positive.
struct Camera {
  Mat3 intrinsics = Mat3::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 0;
  int height = 0;

  void validate() const;

  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 camera_point(const Vec3& world) const {
    return rotation * world + translation;
  }

  struct Projection {
    Vec2 uv = Vec2::Zero();  // continuous pixel coordinates
    Real depth = 0;          // camera-frame z
    bool valid = false;      // false when depth <= kMinDepth
  };
  static constexpr Real kMinDepth = Real(1e-6);

  Projection project(const Vec3& world) const;
  Vec3 unproject(const Vec2& uv, Real depth) const;
  // Unit world-space direction through continuous pixel coordinates.
  Vec3 pixel_ray(Real u, Real v) const;

  nlohmann::json to_json() const;
  static Camera from_json(const nlohmann::json& j);
};

// A camera at spherical coordinates (radius, azimuth, elevation) aiming at
// the origin, +z up.
Camera look_at_origin(Real radius, Real azimuth_rad, Real elevation_rad,
                      Real focal, int width, int height);

}  // namespace defsurf::render
