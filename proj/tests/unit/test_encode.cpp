#include <doctest.h>

#include <random>

#include "defsurf/encode/encoding.hpp"
#include "defsurf/geometry/primitives.hpp"

using namespace defsurf;

namespace {

struct EncoderFixture {
  geom::Mesh mesh = geom::icosphere(2);
  std::shared_ptr<spectral::SpectralBasis> basis;
  std::shared_ptr<spectral::SurfacePointLocator> locator;

  EncoderFixture() {
    basis = std::make_shared<spectral::SpectralBasis>(spectral::eigenbasis(
        spectral::cotan_laplacian(mesh), 24, mesh.content_hash()));
    locator = std::make_shared<spectral::SurfacePointLocator>(mesh);
  }

  encode::HybridEncoder encoder(Index rff_width = 32, Real sigma = 1.5) const {
    return encode::HybridEncoder(
        basis, locator, encode::RffMatrix::sample(rff_width, sigma, 42));
  }
};

Mat random_unit_points(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Mat out(n, 3);
  for (Index i = 0; i < n; ++i) {
    Vec3 d;
    do {
      d = Vec3(uni(rng), uni(rng), uni(rng));
    } while (d.squaredNorm() < 1e-6);
    out.row(i) = d.normalized().transpose();
  }
  return out;
}

}  // namespace

TEST_SUITE("encode") {

TEST_CASE("rff sampling is deterministic with the right stats") {
  const auto a = encode::RffMatrix::sample(64, Real(0.5), 7);
  const auto b = encode::RffMatrix::sample(64, Real(0.5), 7);
  CHECK((a.frequencies - b.frequencies).cwiseAbs().maxCoeff() == 0.0);
  const auto c = encode::RffMatrix::sample(64, Real(0.5), 8);
  CHECK((a.frequencies - c.frequencies).cwiseAbs().maxCoeff() > 0.0);

  // Sample std should be near sigma for a few thousand draws.
  const auto wide = encode::RffMatrix::sample(4096, Real(0.5), 3);
  const double stddev = std::sqrt(
      wide.frequencies.array().square().sum() /
      static_cast<double>(wide.frequencies.size()));
  CHECK(stddev == doctest::Approx(0.5).epsilon(0.05));

  CHECK_THROWS_AS(encode::RffMatrix::sample(31, Real(1), 0), ArgumentError);
  CHECK_THROWS_AS(encode::RffMatrix::sample(32, Real(0), 0), ArgumentError);
}

TEST_CASE("rff encoding values") {
  const auto rff = encode::RffMatrix::sample(16, Real(2), 11);

  SUBCASE("origin gives alternating 1, 0") {
    Mat x = Mat::Zero(1, 3);
    const Mat enc = encode::rff_encode(x, rff);
    for (Index c = 0; c < enc.cols(); c += 2) {
      CHECK(enc(0, c) == 1.0);
      CHECK(enc(0, c + 1) == 0.0);
    }
  }
  SUBCASE("bounded entries and the trig identity") {
    const Mat x = random_unit_points(40, 5) * Real(2);
    const Mat enc = encode::rff_encode(x, rff);
    CHECK(enc.maxCoeff() <= 1.0);
    CHECK(enc.minCoeff() >= -1.0);
    for (Index i = 0; i < x.rows(); ++i) {
      Real sum = 0;
      for (Index c = 0; c < enc.cols(); c += 2)
        sum += enc(i, c) * enc(i, c) + enc(i, c + 1) * enc(i, c + 1);
      CHECK(sum == doctest::Approx(enc.cols() / 2.0).epsilon(1e-12));
    }
  }
  SUBCASE("Lipschitz bound |g(x)-g(y)| <= sqrt(2) |B| |x-y|") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double b_norm = rff.frequencies.norm();  // Frobenius >= spectral
    for (int t = 0; t < 20; ++t) {
      Mat x(1, 3), y(1, 3);
      x << uni(rng), uni(rng), uni(rng);
      y << uni(rng), uni(rng), uni(rng);
      const double lhs =
          (encode::rff_encode(x, rff) - encode::rff_encode(y, rff)).norm();
      const double rhs = std::sqrt(2.0) * b_norm * (x - y).norm();
      CHECK(lhs <= rhs + 1e-12);
    }
  }
}

TEST_CASE("octave encoding") {
  SUBCASE("widths") {
    const Mat v = random_unit_points(3, 2);
    CHECK(encode::octave_encode(v, 4).cols() == 24);
    CHECK(encode::octave_encode(v, 3).cols() == 18);
  }
  SUBCASE("zero vector gives cos 1 / sin 0") {
    const Mat enc = encode::octave_encode(Mat::Zero(1, 3), 4);
    for (Index c = 0; c < enc.cols(); c += 2) {
      CHECK(enc(0, c) == 1.0);
      CHECK(enc(0, c + 1) == 0.0);
    }
  }
  SUBCASE("frequencies double per octave") {
    Mat v = Mat::Zero(1, 3);
    v(0, 0) = Real(0.25);
    const Mat enc = encode::octave_encode(v, 3);
    // octave k, axis x: cos(2^k pi 0.25)
    CHECK(enc(0, 0) == doctest::Approx(std::cos(0.25 * kPi)));
    CHECK(enc(0, 6) == doctest::Approx(std::cos(0.5 * kPi)));
    CHECK(enc(0, 12) == doctest::Approx(std::cos(kPi)));
  }
}

TEST_CASE("tape encoders match the plain versions") {
  const auto rff = encode::RffMatrix::sample(16, Real(3), 21);
  const Mat x = random_unit_points(15, 31);
  const Mat plain = encode::rff_encode(x, rff);
  const Mat taped = encode::rff_encode_t(ad::Tensor::constant(x), rff).value();
  CHECK((plain - taped).cwiseAbs().maxCoeff() == 0.0);

  const Mat plain_oct = encode::octave_encode(x, 4);
  const Mat taped_oct =
      encode::octave_encode_t(ad::Tensor::constant(x), 4).value();
  CHECK((plain_oct - taped_oct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("intrinsic encoding lookup and interpolation") {
  const EncoderFixture fx;
  const auto encoder = fx.encoder();

  SUBCASE("vertex ids give exact rows") {
    Mat pts(2, 3);
    pts.row(0) = fx.mesh.vertices()[3].transpose();
    pts.row(1) = fx.mesh.vertices()[77].transpose();
    std::vector<int> ids = {3, 77};
    const Mat rows = encoder.intrinsic(pts, &ids);
    CHECK((rows.row(0) - fx.basis->eigenfunctions.row(3)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((rows.row(1) - fx.basis->eigenfunctions.row(77))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  SUBCASE("constant channel stays constant off-vertex") {
    const Mat pts = random_unit_points(25, 17);
    const Mat rows = encoder.intrinsic(pts);
    CHECK((rows.col(0).array() - fx.basis->eigenfunctions(0, 0))
              .abs()
              .maxCoeff() < 1e-9);
  }
  SUBCASE("antipodal symmetry of even-parity modes") {
    // The icosphere is centrally symmetric, so discrete eigenfunctions have
    // definite parity; compare |phi| at vertex/antipode for the l=2 band
    // (columns 4..8 on the sphere spectrum).
    const auto& verts = fx.mesh.vertices();
    for (int probe : {4, 10, 50}) {
      const Vec3 anti = -verts[static_cast<std::size_t>(probe)];
      Index anti_idx = 0;
      Real best = 1e9;
      for (Index i = 0; i < fx.mesh.vertex_count(); ++i) {
        const Real d = (verts[static_cast<std::size_t>(i)] - anti).norm();
        if (d < best) {
          best = d;
          anti_idx = i;
        }
      }
      REQUIRE(best < 1e-12);  // exact antipode exists
      for (Index c = 4; c < 9; ++c)
        CHECK(std::abs(fx.basis->eigenfunctions(probe, c)) ==
              doctest::Approx(std::abs(fx.basis->eigenfunctions(anti_idx, c)))
                  .epsilon(1e-2));
    }
  }
}

TEST_CASE("hybrid encoding layout") {
  const EncoderFixture fx;
  auto encoder = fx.encoder(32);

  SUBCASE("widths add up") {
    CHECK(encoder.width() == 24 + 32);
    const Mat pts = random_unit_points(9, 3);
    CHECK(encoder.hybrid(pts).cols() == encoder.width());
  }
  SUBCASE("zeroed intrinsic block reproduces rff in the extrinsic slice") {
    encoder.zero_intrinsic = true;
    const Mat pts = random_unit_points(9, 4);
    const Mat hybrid = encoder.hybrid(pts);
    CHECK(hybrid.leftCols(24).cwiseAbs().maxCoeff() == 0.0);
    const Mat rff = encode::rff_encode(pts, encoder.rff());
    CHECK((hybrid.rightCols(32) - rff).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("vertex restriction equals column stacking") {
    std::vector<int> ids;
    Mat pts(fx.mesh.vertex_count(), 3);
    for (Index i = 0; i < fx.mesh.vertex_count(); ++i) {
      ids.push_back(static_cast<int>(i));
      pts.row(i) = fx.mesh.vertices()[static_cast<std::size_t>(i)].transpose();
    }
    const Mat hybrid = encoder.hybrid(pts, &ids);
    CHECK((hybrid.leftCols(24) - fx.basis->eigenfunctions)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((hybrid.rightCols(32) - encode::rff_encode(pts, encoder.rff()))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  SUBCASE("eigenvalue scaling switch") {
    encoder.scale_by_eigenvalue = true;
    Mat pts(1, 3);
    pts.row(0) = fx.mesh.vertices()[10].transpose();
    std::vector<int> ids = {10};
    const Mat rows = encoder.intrinsic(pts, &ids);
    CHECK(rows(0, 0) == 0.0);  // ground mode dropped by the scaling
    const Real lambda1 = fx.basis->eigenvalues[1];
    CHECK(rows(0, 1) ==
          doctest::Approx(fx.basis->eigenfunctions(10, 1) /
                          std::sqrt(lambda1)));
  }
  SUBCASE("mismatched basis binding is rejected") {
    const geom::Mesh other = geom::icosphere(1);
    auto other_locator = std::make_shared<spectral::SurfacePointLocator>(other);
    CHECK_THROWS_AS(
        encode::HybridEncoder(fx.basis, other_locator,
                              encode::RffMatrix::sample(8, Real(1), 0)),
        ConfigError);
  }
}

}  // TEST_SUITE
