#include "defsurf/scenes/shapes.hpp"

#include <cmath>
#include <complex>

namespace defsurf::scenes {

namespace {

Real rounded_box_sdf(const Vec3& p, const Vec3& half, Real radius) {
  const Vec3 core = half - Vec3::Constant(radius);
  const Vec3 q = p.cwiseAbs() - core;
  const Vec3 outside = q.cwiseMax(Real(0));
  const Real inside = std::min(q.maxCoeff(), Real(0));
  return outside.norm() + inside - radius;
}

}  // namespace

void TargetShape::validate() const {
  switch (kind) {
    case Kind::Ellipsoid:
      if (!(radii.minCoeff() > Real(0)))
        throw ArgumentError("TargetShape: ellipsoid radii must be positive");
      break;
    case Kind::BumpySphere:
      if (!(bump_base > Real(0)) || bump_amplitude < Real(0) ||
          bump_amplitude >= bump_base || bump_frequency < 1)
        throw ArgumentError("TargetShape: invalid bumpy sphere parameters");
      break;
    case Kind::RoundedBox:
      if (!(box_radius > Real(0)) || !(box_half.minCoeff() > box_radius))
        throw ArgumentError(
            "TargetShape: rounded box needs half extents larger than the "
            "corner radius");
      break;
  }
}

Real TargetShape::radial(const Vec3& direction) const {
  switch (kind) {
    case Kind::Ellipsoid: {
      const Vec3 scaled = direction.cwiseQuotient(radii);
      return Real(1) / scaled.norm();
    }
    case Kind::BumpySphere: {
      const std::complex<Real> w(direction.x(), direction.y());
      const Real bump = std::pow(w, bump_frequency).real();
      return bump_base + bump_amplitude * bump;
    }
    case Kind::RoundedBox: {
      // Bisection on the SDF along the ray from the origin: the set is
      // convex and contains the origin, so there is a single crossing.
      Real lo = Real(0);
      Real hi = box_half.norm() + box_radius;
      for (int iter = 0; iter < 64; ++iter) {
        const Real mid = Real(0.5) * (lo + hi);
        if (rounded_box_sdf(mid * direction, box_half, box_radius) < Real(0))
          lo = mid;
        else
          hi = mid;
        if (hi - lo < Real(1e-9)) break;
      }
      return Real(0.5) * (lo + hi);
    }
  }
  throw ArgumentError("TargetShape: unknown kind");
}

bool TargetShape::inside(const Vec3& point) const {
  switch (kind) {
    case Kind::Ellipsoid:
      return point.cwiseQuotient(radii).squaredNorm() <= Real(1);
    case Kind::BumpySphere: {
      const Real r = point.norm();
      if (r == Real(0)) return true;
      return r <= radial(point / r);
    }
    case Kind::RoundedBox:
      return rounded_box_sdf(point, box_half, box_radius) <= Real(0);
  }
  return false;
}

Vec3 TargetShape::surface_normal(const Vec3& surface_pt) const {
  // Central differences of F(p) = |p| - rho(p/|p|).
  auto implicit_f = [&](const Vec3& p) {
    const Real r = p.norm();
    return r - radial(p / r);
  };
  const Real h = Real(1e-6);
  Vec3 grad;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 dp = Vec3::Zero();
    dp[axis] = h;
    grad[axis] = (implicit_f(surface_pt + dp) - implicit_f(surface_pt - dp)) /
                 (Real(2) * h);
  }
  const Real len = grad.norm();
  if (!(len > Real(0)))
    throw NumericError("surface_normal: vanishing implicit gradient");
  return grad / len;
}

Real TargetShape::bounding_radius() const {
  switch (kind) {
    case Kind::Ellipsoid:
      return radii.maxCoeff();
    case Kind::BumpySphere:
      return bump_base + bump_amplitude;
    case Kind::RoundedBox:
      return box_half.norm() + box_radius;
  }
  return Real(1);
}

nlohmann::json TargetShape::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case Kind::Ellipsoid:
      j["kind"] = "ellipsoid";
      j["radii"] = {static_cast<double>(radii.x()),
                    static_cast<double>(radii.y()),
                    static_cast<double>(radii.z())};
      break;
    case Kind::BumpySphere:
      j["kind"] = "bumpy";
      j["base"] = static_cast<double>(bump_base);
      j["amplitude"] = static_cast<double>(bump_amplitude);
      j["frequency"] = bump_frequency;
      break;
    case Kind::RoundedBox:
      j["kind"] = "box";
      j["half_extents"] = {static_cast<double>(box_half.x()),
                           static_cast<double>(box_half.y()),
                           static_cast<double>(box_half.z())};
      j["corner_radius"] = static_cast<double>(box_radius);
      break;
  }
  return j;
}

TargetShape TargetShape::from_json(const nlohmann::json& j) {
  TargetShape shape = from_name(j.at("kind").get<std::string>());
  if (shape.kind == Kind::Ellipsoid && j.contains("radii")) {
    const auto& r = j["radii"];
    shape.radii = Vec3(static_cast<Real>(r[0].get<double>()),
                       static_cast<Real>(r[1].get<double>()),
                       static_cast<Real>(r[2].get<double>()));
  }
  if (shape.kind == Kind::BumpySphere) {
    if (j.contains("base")) shape.bump_base = static_cast<Real>(j["base"].get<double>());
    if (j.contains("amplitude"))
      shape.bump_amplitude = static_cast<Real>(j["amplitude"].get<double>());
    if (j.contains("frequency")) shape.bump_frequency = j["frequency"].get<int>();
  }
  if (shape.kind == Kind::RoundedBox) {
    if (j.contains("half_extents")) {
      const auto& h = j["half_extents"];
      shape.box_half = Vec3(static_cast<Real>(h[0].get<double>()),
                            static_cast<Real>(h[1].get<double>()),
                            static_cast<Real>(h[2].get<double>()));
    }
    if (j.contains("corner_radius"))
      shape.box_radius = static_cast<Real>(j["corner_radius"].get<double>());
  }
  shape.validate();
  return shape;
}

TargetShape TargetShape::from_name(const std::string& name) {
  TargetShape shape;
  if (name == "ellipsoid") {
    shape.kind = Kind::Ellipsoid;
  } else if (name == "bumpy") {
    shape.kind = Kind::BumpySphere;
  } else if (name == "box") {
    shape.kind = Kind::RoundedBox;
  } else {
    throw ArgumentError("TargetShape: unknown kind '" + name +
                        "' (valid: ellipsoid, bumpy, box)");
  }
  return shape;
}

Vec3 AlbedoField::at(const Vec3& d) const {
  return Vec3(Real(0.5) + Real(0.4) * std::sin(frequency * (d.x() + Real(0.5) * d.y())),
              Real(0.5) + Real(0.4) * std::sin(frequency * (d.y() + Real(0.5) * d.z()) + Real(2.1)),
              Real(0.5) + Real(0.4) * std::sin(frequency * (d.z() + Real(0.5) * d.x()) + Real(4.2)));
}

}  // namespace defsurf::scenes
