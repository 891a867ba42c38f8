#include <doctest.h>

#include <random>

#include "defsurf/fields/deformation.hpp"
#include "defsurf/geometry/quality.hpp"
#include "defsurf/geometry/chamfer.hpp"
#include "support/gradcheck.hpp"

using namespace defsurf;

namespace {

// Small field over a level-1 icosphere basis for fast tests.
struct FieldFixture {
  geom::Mesh basis_mesh = geom::icosphere(1);
  std::shared_ptr<spectral::SpectralBasis> basis;
  std::shared_ptr<spectral::SurfacePointLocator> locator;

  FieldFixture() {
    basis = std::make_shared<spectral::SpectralBasis>(spectral::eigenbasis(
        spectral::cotan_laplacian(basis_mesh), 10, basis_mesh.content_hash()));
    locator = std::make_shared<spectral::SurfacePointLocator>(basis_mesh);
  }

  fields::DeformationConfig small_config() const {
    fields::DeformationConfig cfg;
    cfg.coarse_rff_width = 8;
    cfg.fine_rff_width = 8;
    cfg.hidden_width = 12;
    cfg.z_width = 4;
    cfg.seed = 99;
    return cfg;
  }

  fields::DeformationField make_field() const {
    return fields::DeformationField(small_config(), basis, locator);
  }
};

void randomize_output_layers(fields::DeformationField& field,
                             std::uint64_t seed, Real scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto jiggle = [&](ad::Mlp& mlp) {
    Mat& w = mlp.weights.back().raw_value();
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r)
        w(r, c) = static_cast<Real>(uni(rng)) * scale;
  };
  jiggle(field.coarse_net());
  jiggle(field.fine_net());
}

}  // namespace

TEST_SUITE("fields") {

TEST_CASE("delta schedule") {
  const fields::DeltaSchedule paper{500, 100, Real(0.1)};
  CHECK(paper.at(0) == 0.0);
  CHECK(paper.at(500) == 0.0);
  CHECK(paper.at(550) == doctest::Approx(0.05));
  CHECK(paper.at(600) == doctest::Approx(0.1));
  CHECK(paper.at(10000) == doctest::Approx(0.1));
}

TEST_CASE("residual identity at zero-initialized output layers") {
  const FieldFixture fx;
  const fields::DeformationField field = fx.make_field();

  SUBCASE("coarse stage is the identity") {
    const Mat pts = fx.basis_mesh.vertex_matrix();
    const ad::Tensor out = field.deform_coarse(pts);
    CHECK((out.value() - pts).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("extraction reproduces the domain mesh exactly") {
    const geom::Mesh domain = geom::icosphere(2);
    const geom::Mesh mesh = field.extract_mesh(domain, Real(0.1));
    REQUIRE(mesh.vertex_count() == domain.vertex_count());
    for (Index i = 0; i < mesh.vertex_count(); ++i)
      CHECK((mesh.vertices()[static_cast<std::size_t>(i)] -
             domain.vertices()[static_cast<std::size_t>(i)])
                .norm() == 0.0);
  }
}

TEST_CASE("delta gates the fine stage") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 3, Real(0.5));

  const Mat pts = fx.basis_mesh.vertex_matrix();
  std::vector<int> ids(static_cast<std::size_t>(pts.rows()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);

  const ad::Tensor coarse = field.deform_coarse(pts);
  const auto gated = field.deform_full(pts, &ids, Real(0));
  CHECK((gated.positions.value() - coarse.value()).cwiseAbs().maxCoeff() ==
        0.0);

  const auto open = field.deform_full(pts, &ids, Real(0.1));
  CHECK((open.positions.value() - coarse.value()).cwiseAbs().maxCoeff() >
        0.0);
  CHECK(open.features.cols() == 4);
}

TEST_CASE("paper-scale configuration defaults") {
  fields::DeformationConfig cfg;
  CHECK(cfg.sigma_coarse == doctest::Approx(0.5));
  CHECK(cfg.sigma_fine == doctest::Approx(4.0));
  CHECK(cfg.hidden_width == 400);
  CHECK(cfg.z_width == 128);
  CHECK(cfg.delta_coarse == doctest::Approx(1.0));
}

TEST_CASE("deformation gradients match finite differences") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 17, Real(0.3));

  Mat pts(6, 3);
  for (Index i = 0; i < 6; ++i)
    pts.row(i) =
        fx.basis_mesh.vertices()[static_cast<std::size_t>(i * 5)].transpose();
  std::vector<int> ids = {0, 5, 10, 15, 20, 25};

  const Mat probe = Mat::Random(6, 3);
  auto builder = [&] {
    const auto eval = field.deform_full(pts, &ids, Real(0.1));
    return ad::sum(ad::mul(eval.positions, ad::Tensor::constant(probe)));
  };
  std::mt19937_64 rng(23);
  std::vector<ad::Tensor> params = field.coarse_parameters();
  const auto fine_params = field.fine_parameters();
  params.insert(params.end(), fine_params.begin(), fine_params.end());
  const auto report = test::check_gradients(builder, params, 5, 1e-5, rng);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("freeze stops coarse updates while fine continues") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 29, Real(0.2));
  field.freeze_coarse();

  std::vector<Mat> coarse_before;
  for (const auto& p : field.coarse_parameters())
    coarse_before.push_back(p.value());
  Mat fine_before = field.fine_net().weights[0].value();

  ad::AdamConfig cfg;
  cfg.lr = Real(1e-2);
  ad::Adam adam(field.fine_parameters(), cfg);

  const Mat pts = fx.basis_mesh.vertex_matrix();
  for (int step = 0; step < 10; ++step) {
    const auto eval = field.deform_mesh(fx.basis_mesh, Real(0.1));
    const ad::Tensor loss = ad::mean(ad::square(eval.positions));
    ad::backward(loss);
    adam.step();
    adam.zero_grad();
  }

  const auto coarse_after = field.coarse_parameters();
  for (std::size_t i = 0; i < coarse_after.size(); ++i) {
    CHECK((coarse_after[i].value() - coarse_before[i]).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(!coarse_after[i].has_grad());  // zero-gradient audit: nothing flowed
  }
  CHECK((field.fine_net().weights[0].value() - fine_before)
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("extraction is one forward evaluation per vertex") {
  const FieldFixture fx;
  const fields::DeformationField field = fx.make_field();
  const geom::Mesh domain = geom::icosphere(3);
  const long before = field.forward_evaluations();
  field.extract_mesh(domain, Real(0.1));
  CHECK(field.forward_evaluations() - before == domain.vertex_count());
}

TEST_CASE("extraction keeps connectivity for tri and quad domains") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 31, Real(0.4));

  const geom::Mesh tri = field.extract_mesh(geom::icosphere(3), Real(0.1));
  CHECK(tri.euler_characteristic() == 2);
  CHECK(tri.is_closed());
  CHECK(tri.is_consistently_oriented());

  const geom::Mesh quad = field.extract_mesh(geom::quad_sphere(9), Real(0.1));
  CHECK(quad.euler_characteristic() == 2);
  CHECK(quad.is_closed());
  CHECK(quad.is_consistently_oriented());
  CHECK(quad.faces()[0].size == 4);
}

TEST_CASE("continuity probe across triangle boundaries") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 37, Real(0.5));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double max_ratio = 0;
  for (int t = 0; t < 60; ++t) {
    Vec3 d(uni(rng), uni(rng), uni(rng));
    d.normalize();
    // geodesic step of about 1e-4 in a random tangent direction
    Vec3 tangent = d.cross(Vec3(uni(rng), uni(rng), uni(rng)));
    if (tangent.norm() < 1e-8) continue;
    tangent.normalize();
    const Vec3 d2 = (d + Real(1e-4) * tangent).normalized();

    Mat pts(2, 3);
    pts.row(0) = d.transpose();
    pts.row(1) = d2.transpose();
    const auto eval = field.deform_full(pts, nullptr, Real(0.1));
    const double dist =
        (eval.positions.value().row(0) - eval.positions.value().row(1)).norm();
    max_ratio = std::max(max_ratio, dist / 1e-4);
  }
  MESSAGE("continuity constant K ~= ", max_ratio);
  CHECK(max_ratio < 100.0);  // no discontinuity spikes
}

TEST_CASE("connectivity decoupling") {
  const FieldFixture fx;
  fields::DeformationField field = fx.make_field();
  randomize_output_layers(field, 43, Real(0.4));

  // Two different meshings of comparable resolution.
  const geom::Mesh tri = field.extract_mesh(geom::icosphere(3), Real(0.1));
  const geom::Mesh quad = field.extract_mesh(geom::quad_sphere(10), Real(0.1));

  const Mat tri_pts = geom::sample_surface_points(tri, 4000, 1);
  const Mat quad_pts = geom::sample_surface_points(quad, 4000, 2);
  const Real chamfer = geom::chamfer_l1(tri_pts, quad_pts);

  // Mean edge length of the tri domain at level 3.
  double edge_sum = 0;
  for (const auto& e : tri.edges())
    edge_sum += (tri.vertices()[e[0]] - tri.vertices()[e[1]]).norm();
  const double mean_edge = edge_sum / static_cast<double>(tri.edge_count());
  CHECK(chamfer < mean_edge);
}

TEST_CASE("no-coarse ablation uses the identity first stage") {
  const FieldFixture fx;
  fields::DeformationConfig cfg = fx.small_config();
  cfg.no_coarse = true;
  fields::DeformationField field(cfg, fx.basis, fx.locator);
  const Mat pts = fx.basis_mesh.vertex_matrix();
  CHECK((field.deform_coarse(pts).value() - pts).cwiseAbs().maxCoeff() == 0.0);
  CHECK(field.coarse_parameters().empty());
}

}  // TEST_SUITE
