#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace defsurf {

// Scalar width is a compile-time mode; tests assume the default 64-bit build.
#if defined(DEFSURF_SCALAR_FLOAT32)
using Real = float;
#else
using Real = double;
#endif

using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Vec2 = Eigen::Matrix<Real, 2, 1>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Mat3 = Eigen::Matrix<Real, 3, 3>;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values or mis-sized inputs.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Resource limits (e.g. subdivision level above the supported cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Mesh connectivity violates a precondition (non-manifold, open, flipped).
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a solver failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (widths, bindings, versions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or cache written by an incompatible producer.
class VersionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& message, int line)
      : IoError(message + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Wrong API usage (e.g. backward on a non-scalar root).
class UsageError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, used for mesh identity hashes and seed derivation.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t hash = 0xcbf29ce484222325ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

inline std::uint64_t fnv1a(std::string_view text,
                           std::uint64_t hash = 0xcbf29ce484222325ull) {
  return fnv1a(text.data(), text.size(), hash);
}

namespace rng {

using Engine = std::mt19937_64;

// Named substream derivation so every consumer has an independent,
// reproducible seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = fnv1a(label);
  h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Box-Muller; self-contained so streams do not depend on the standard
// library's unspecified normal_distribution algorithm.
class NormalSampler {
 public:
  double operator()(Engine& engine) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01(engine);
    } while (u1 <= 0.0);
    const double u2 = uniform01(engine);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rng

constexpr Real kPi = static_cast<Real>(3.14159265358979323846);

}  // namespace defsurf
