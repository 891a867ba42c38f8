#pragma once

#include <json.hpp>

#include "defsurf/common.hpp"

namespace defsurf::scenes {

// Star-shaped analytic targets (single-valued radial function from the
// origin, so sphere topology is guaranteed).
struct TargetShape {
  enum class Kind { Ellipsoid, BumpySphere, RoundedBox };
  Kind kind = Kind::Ellipsoid;

  // Ellipsoid semi-axes.
  Vec3 radii{Real(0.9), Real(0.6), Real(0.6)};
  // Bumpy sphere: rho = base + amplitude * Re[(dx + i*dy)^l]; the bump
  // pattern attains exactly +-1, so radius spans [base-amp, base+amp].
  Real bump_base = Real(1);
  Real bump_amplitude = Real(0.08);
  int bump_frequency = 6;
  // Rounded box: Minkowski sum of a box with a ball.
  Vec3 box_half{Real(0.6), Real(0.45), Real(0.35)};
  Real box_radius = Real(0.15);

  void validate() const;

  // Radial function rho(direction); `direction` must be unit length.
  Real radial(const Vec3& direction) const;
  bool inside(const Vec3& point) const;
  Vec3 surface_point(const Vec3& direction) const {
    return radial(direction) * direction;
  }
  // Outward unit normal at a surface point, from the numeric gradient of the
  // implicit function |p| - rho(p/|p|).
  Vec3 surface_normal(const Vec3& surface_pt) const;

  // Conservative bounding radius (dense direction sweep plus margin).
  Real bounding_radius() const;

  nlohmann::json to_json() const;
  static TargetShape from_json(const nlohmann::json& j);
  static TargetShape from_name(const std::string& name);  // default params
};

// Band-limited trigonometric albedo over the unit direction; the
// high-frequency variant feeds the intrinsic-encoding ablation scene.
struct AlbedoField {
  Real frequency = Real(3);

  Vec3 at(const Vec3& direction) const;
};

struct SceneLight {
  Vec3 toward_light = Vec3(Real(0.4), Real(0.3), Real(0.85)).normalized();
};

}  // namespace defsurf::scenes
