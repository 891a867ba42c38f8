#include "defsurf/render/camera.hpp"

#include <cmath>

namespace defsurf::render {

void Camera::validate() const {
  if (width < 1 || height < 1)
    throw ConfigError("Camera: resolution must be positive");
  if (!(intrinsics(0, 0) > Real(0)) || !(intrinsics(1, 1) > Real(0)))
    throw ConfigError("Camera: focal lengths must be positive");
  if (intrinsics(1, 0) != Real(0) || intrinsics(2, 0) != Real(0) ||
      intrinsics(2, 1) != Real(0) || intrinsics(2, 2) != Real(1))
    throw ConfigError("Camera: K must be upper-triangular with K(2,2) = 1");
  const Mat3 gram = rotation * rotation.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > Real(1e-9))
    throw ConfigError("Camera: R is not orthonormal");
}

Camera::Projection Camera::project(const Vec3& world) const {
  Projection p;
  const Vec3 cam = camera_point(world);
  p.depth = cam.z();
  if (!(p.depth > kMinDepth)) {
    p.valid = false;
    return p;
  }
  p.uv.x() = intrinsics(0, 0) * cam.x() / cam.z() +
             intrinsics(0, 1) * cam.y() / cam.z() + intrinsics(0, 2);
  p.uv.y() = intrinsics(1, 1) * cam.y() / cam.z() + intrinsics(1, 2);
  p.valid = true;
  return p;
}

Vec3 Camera::unproject(const Vec2& uv, Real depth) const {
  const Real y = (uv.y() - intrinsics(1, 2)) / intrinsics(1, 1) * depth;
  const Real x =
      (uv.x() - intrinsics(0, 2) - intrinsics(0, 1) * y / depth) /
      intrinsics(0, 0) * depth;
  return rotation.transpose() * (Vec3(x, y, depth) - translation);
}

Vec3 Camera::pixel_ray(Real u, Real v) const {
  const Vec3 target = unproject(Vec2(u, v), Real(1));
  return (target - center()).normalized();
}

nlohmann::json Camera::to_json() const {
  auto mat_to_array = [](const Mat3& m) {
    std::vector<double> values;
    values.reserve(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        values.push_back(static_cast<double>(m(r, c)));
    return values;
  };
  return nlohmann::json{
      {"K", mat_to_array(intrinsics)},
      {"R", mat_to_array(rotation)},
      {"t", {static_cast<double>(translation.x()),
             static_cast<double>(translation.y()),
             static_cast<double>(translation.z())}},
      {"width", width},
      {"height", height}};
}

Camera Camera::from_json(const nlohmann::json& j) {
  Camera cam;
  auto array_to_mat = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 9)
      throw ConfigError("Camera: expected 9 floats for a 3x3 matrix");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        m(r, c) = static_cast<Real>(a[static_cast<std::size_t>(3 * r + c)]
                                        .get<double>());
    return m;
  };
  cam.intrinsics = array_to_mat(j.at("K"));
  cam.rotation = array_to_mat(j.at("R"));
  const auto& t = j.at("t");
  if (!t.is_array() || t.size() != 3)
    throw ConfigError("Camera: expected 3 floats for t");
  cam.translation =
      Vec3(static_cast<Real>(t[0].get<double>()),
           static_cast<Real>(t[1].get<double>()),
           static_cast<Real>(t[2].get<double>()));
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.validate();
  return cam;
}

Camera look_at_origin(Real radius, Real azimuth_rad, Real elevation_rad,
                      Real focal, int width, int height) {
  if (!(radius > Real(0))) throw ArgumentError("look_at_origin: radius <= 0");
  const Vec3 eye(radius * std::cos(elevation_rad) * std::cos(azimuth_rad),
                 radius * std::cos(elevation_rad) * std::sin(azimuth_rad),
                 radius * std::sin(elevation_rad));
  // Camera +z looks from the eye toward the origin.
  const Vec3 forward = (-eye).normalized();
  Vec3 up(0, 0, 1);
  if (std::abs(forward.dot(up)) > Real(0.999)) up = Vec3(0, 1, 0);
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right).normalized();  // +y is image-down

  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  cam.intrinsics = Mat3::Identity();
  cam.intrinsics(0, 0) = focal;
  cam.intrinsics(1, 1) = focal;
  cam.intrinsics(0, 2) = Real(0.5) * static_cast<Real>(width);
  cam.intrinsics(1, 2) = Real(0.5) * static_cast<Real>(height);
  cam.validate();
  return cam;
}

}  // namespace defsurf::render
