#include <doctest.h>

#include <random>

#include "defsurf/ad/nn.hpp"
#include "support/gradcheck.hpp"

using namespace defsurf;
using ad::Tensor;

namespace {

Mat random_mat(Index rows, Index cols, std::mt19937_64& rng, double scale = 1) {
  std::uniform_real_distribution<double> uni(-scale, scale);
  Mat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = static_cast<Real>(uni(rng));
  return m;
}

constexpr double kTol = 1e-5;
constexpr double kStep = 1e-5;

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("scalar basics") {
  SUBCASE("d/dx x^2 at 3 is 6") {
    Tensor x = Tensor::parameter(Mat::Constant(1, 1, 3));
    Tensor y = ad::square(x);
    ad::backward(y);
    CHECK(x.grad()(0, 0) == 6.0);
  }
  SUBCASE("softplus derivative at 0 is one half") {
    Tensor x = Tensor::parameter(Mat::Zero(1, 1));
    ad::backward(ad::softplus(x));
    CHECK(x.grad()(0, 0) == 0.5);
  }
  SUBCASE("relu derivative at exactly 0 is 0") {
    Tensor x = Tensor::parameter(Mat::Zero(1, 1));
    ad::backward(ad::relu(x));
    CHECK(x.grad()(0, 0) == 0.0);
  }
  SUBCASE("backward requires a scalar root") {
    Tensor x = Tensor::parameter(Mat::Zero(2, 2));
    CHECK_THROWS_AS(ad::backward(ad::square(x)), UsageError);
  }
}

TEST_CASE("every primitive passes the finite-difference oracle") {
  std::mt19937_64 rng(101);

  auto run = [&](const char* name, const std::function<Tensor()>& builder,
                 std::vector<Tensor> params) {
    INFO("op: ", name, " max_rel_error: ");
    const auto report =
        test::check_gradients(builder, std::move(params), 6, kStep, rng);
    INFO(report.max_rel_error);
    CHECK(report.max_rel_error < kTol);
  };

  Tensor a = Tensor::parameter(random_mat(4, 3, rng));
  Tensor b = Tensor::parameter(random_mat(4, 3, rng));
  Tensor row = Tensor::parameter(random_mat(1, 3, rng));
  Tensor scalar = Tensor::parameter(random_mat(1, 1, rng));

  run("add", [&] { return ad::sum(ad::add(a, b)); }, {a, b});
  run("add_row_broadcast", [&] { return ad::sum(ad::add(a, row)); }, {a, row});
  run("add_scalar", [&] { return ad::sum(ad::add(a, scalar)); }, {a, scalar});
  run("sub", [&] { return ad::sum(ad::sub(a, b)); }, {a, b});
  run("mul", [&] { return ad::sum(ad::mul(a, b)); }, {a, b});
  run("mul_row", [&] { return ad::sum(ad::mul(a, row)); }, {a, row});
  run("neg_affine", [&] { return ad::sum(ad::affine(ad::neg(a), 2.5, 0.3)); },
      {a});
  const Tensor matmul_rhs = Tensor::constant(random_mat(3, 5, rng));
  run("matmul", [&] { return ad::sum(ad::matmul(a, matmul_rhs)); }, {a});
  run("concat_slice",
      [&] {
        Tensor joined = ad::concat_cols({a, b});
        return ad::sum(ad::slice_cols(joined, 2, 3));
      },
      {a, b});
  run("concat_rows_slice",
      [&] {
        Tensor joined = ad::concat_rows({a, b});
        return ad::sum(ad::slice_rows(joined, 2, 4));
      },
      {a, b});
  run("interleave",
      [&] { return ad::sum(ad::square(ad::interleave_cols(a, b))); }, {a, b});
  run("mean", [&] { return ad::mean(ad::mul(a, a)); }, {a});
  run("square", [&] { return ad::sum(ad::square(a)); }, {a});
  run("sin_cos",
      [&] { return ad::sum(ad::add(ad::sin(a), ad::cos(ad::mul(a, b)))); },
      {a, b});
  run("sigmoid", [&] { return ad::sum(ad::sigmoid(a)); }, {a});
  run("softplus", [&] { return ad::sum(ad::softplus(a)); }, {a});

  // Positive-domain and kink-avoiding inputs.
  Tensor positive = Tensor::parameter(
      (random_mat(4, 3, rng).array().abs() + 0.5).matrix());
  run("sqrt", [&] { return ad::sum(ad::sqrt(positive)); }, {positive});
  run("div", [&] { return ad::sum(ad::div(a, positive)); }, {a, positive});
  Tensor away_from_zero = Tensor::parameter(
      (random_mat(4, 3, rng).array() + 3.0).matrix());
  run("abs", [&] { return ad::sum(ad::abs(away_from_zero)); },
      {away_from_zero});
  run("relu", [&] { return ad::sum(ad::relu(away_from_zero)); },
      {away_from_zero});

  // Row-geometry ops.
  run("cross", [&] { return ad::sum(ad::square(ad::cross(a, b))); }, {a, b});
  run("dot", [&] { return ad::sum(ad::square(ad::dot(a, b))); }, {a, b});
  Tensor off_origin = Tensor::parameter(
      (random_mat(5, 3, rng).array() + 2.5).matrix());
  const Tensor normalize_probe = Tensor::constant(random_mat(5, 3, rng));
  run("normalize",
      [&] {
        return ad::sum(ad::mul(ad::normalize_rows(off_origin), normalize_probe));
      },
      {off_origin});

  // Index ops.
  run("gather", [&] { return ad::sum(ad::square(ad::gather_rows(a, {2, 0, 2, 3, 1}))); },
      {a});
  run("scatter_add",
      [&] {
        return ad::sum(
            ad::square(ad::scatter_add_rows(a, {1, 0, 1, 5}, 6)));
      },
      {a});
}

TEST_CASE("random five-layer composition passes the oracle") {
  std::mt19937_64 rng(202);
  Tensor w1 = Tensor::parameter(random_mat(6, 8, rng, 0.7));
  Tensor w2 = Tensor::parameter(random_mat(8, 8, rng, 0.7));
  Tensor w3 = Tensor::parameter(random_mat(8, 4, rng, 0.7));
  Tensor bias = Tensor::parameter(random_mat(1, 8, rng, 0.2));
  const Tensor input = Tensor::constant(random_mat(10, 6, rng));

  auto builder = [&] {
    Tensor h = ad::softplus(ad::add(ad::matmul(input, w1), bias));
    h = ad::sigmoid(ad::matmul(h, w2));
    h = ad::sin(ad::matmul(h, w3));
    return ad::mean(ad::square(h));
  };
  const auto report =
      test::check_gradients(builder, {w1, w2, w3, bias}, 10, kStep, rng);
  CHECK(report.max_rel_error < kTol);
}

TEST_CASE("detach blocks gradient exactly") {
  std::mt19937_64 rng(7);
  Tensor x = Tensor::parameter(random_mat(3, 3, rng));
  Tensor y = ad::sum(ad::square(ad::detach(x)));
  ad::backward(y);
  CHECK(!x.has_grad());  // bitwise zero contribution: nothing accumulated

  // Mixed path: gradient flows only through the non-detached branch.
  Tensor z = ad::sum(ad::add(ad::square(ad::detach(x)), ad::mul(x, x)));
  ad::backward(z);
  REQUIRE(x.has_grad());
  CHECK((x.grad() - 2 * x.value()).cwiseAbs().maxCoeff() == 0.0);
  x.zero_grad();
}

TEST_CASE("repeated backward is bitwise deterministic") {
  std::mt19937_64 rng(8);
  Tensor w = Tensor::parameter(random_mat(5, 5, rng));
  const Tensor input = Tensor::constant(random_mat(5, 5, rng));
  Tensor loss = ad::mean(ad::square(ad::softplus(ad::matmul(input, w))));
  ad::backward(loss);
  const Mat first = w.grad();
  ad::backward(loss);
  const Mat second = w.grad();
  CHECK((first - second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient accumulates over shared subexpressions") {
  Tensor x = Tensor::parameter(Mat::Constant(1, 1, 2));
  Tensor y = ad::add(ad::square(x), ad::square(x));  // 2x^2
  ad::backward(y);
  CHECK(x.grad()(0, 0) == 8.0);
}

TEST_CASE("mlp forward semantics") {
  SUBCASE("zero weights give zero output") {
    ad::MlpConfig cfg;
    cfg.input = 4;
    cfg.hidden = {5};
    cfg.output = 3;
    ad::Mlp mlp = ad::Mlp::init(cfg, 1, true);
    for (auto& w : mlp.weights) w.raw_value().setZero();
    for (auto& b : mlp.biases) b.raw_value().setZero();
    std::mt19937_64 rng(3);
    const Tensor out = mlp.forward(Tensor::constant(random_mat(7, 4, rng)));
    // softplus(0) = log 2 feeds a zero output layer, so the output is zero
    CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity-configured linear net reproduces the input") {
    ad::MlpConfig cfg;
    cfg.input = 3;
    cfg.hidden = {};
    cfg.output = 3;
    ad::Mlp mlp = ad::Mlp::init(cfg, 1, false);
    mlp.weights[0].raw_value() = Mat::Identity(3, 3);
    mlp.biases[0].raw_value().setZero();
    std::mt19937_64 rng(4);
    const Mat input = random_mat(6, 3, rng);
    const Tensor out = mlp.forward(Tensor::constant(input));
    CHECK((out.value() - input).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("deformation-field architecture shapes") {
    ad::MlpConfig cfg;
    cfg.input = 456;
    cfg.hidden = {400};
    cfg.output = 3 + 128;
    const ad::Mlp mlp = ad::Mlp::init(cfg, 5, true);
    CHECK(mlp.weights[0].rows() == 456);
    CHECK(mlp.weights[0].cols() == 400);
    CHECK(mlp.weights[1].rows() == 400);
    CHECK(mlp.weights[1].cols() == 131);
    CHECK(mlp.weights[1].value().cwiseAbs().maxCoeff() == 0.0);  // zero init
  }
  SUBCASE("width mismatch is a config error") {
    ad::MlpConfig cfg;
    cfg.input = 4;
    cfg.hidden = {5};
    cfg.output = 2;
    const ad::Mlp mlp = ad::Mlp::init(cfg, 1, true);
    CHECK_THROWS_AS(mlp.forward(Tensor::constant(Mat::Zero(3, 5))),
                    ConfigError);
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves by about lr in the descent direction") {
    std::mt19937_64 rng(5);
    Tensor p = Tensor::parameter(random_mat(3, 3, rng));
    const Mat initial = p.value();
    ad::AdamConfig cfg;
    cfg.lr = Real(1e-2);
    ad::Adam adam({p}, cfg);
    // constant gradient 0.7 on every entry
    p.node()->accumulate_grad(Mat::Constant(3, 3, Real(0.7)));
    adam.step();
    const Mat delta = p.value() - initial;
    for (Index c = 0; c < 3; ++c)
      for (Index r = 0; r < 3; ++r)
        CHECK(delta(r, c) == doctest::Approx(-1e-2).epsilon(1e-6));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::parameter(Mat::Constant(2, 2, 1.5));
    ad::Adam adam({p}, {});
    p.node()->accumulate_grad(Mat::Zero(2, 2));
    adam.step();
    CHECK((p.value() - Mat::Constant(2, 2, 1.5)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("missing gradient counts as zero") {
    Tensor p = Tensor::parameter(Mat::Constant(2, 2, 1.5));
    ad::Adam adam({p}, {});
    adam.step();
    CHECK((p.value() - Mat::Constant(2, 2, 1.5)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("non-finite gradients skip or throw per config") {
    Tensor p = Tensor::parameter(Mat::Constant(1, 1, 1.0));
    ad::AdamConfig skip_cfg;
    skip_cfg.skip_non_finite = true;
    ad::Adam skipping({p}, skip_cfg);
    p.node()->accumulate_grad(
        Mat::Constant(1, 1, std::numeric_limits<Real>::quiet_NaN()));
    CHECK(!skipping.step());
    CHECK(skipping.skipped_count() == 1);
    CHECK(p.value()(0, 0) == 1.0);

    ad::AdamConfig throw_cfg;
    throw_cfg.skip_non_finite = false;
    ad::Adam throwing({p}, throw_cfg);
    CHECK_THROWS_AS(throwing.step(), NumericError);
    p.zero_grad();
  }
  SUBCASE("lr decay by 0.75 at refinement") {
    Tensor p = Tensor::parameter(Mat::Zero(1, 1));
    ad::AdamConfig cfg;
    cfg.lr = Real(2e-3);
    ad::Adam adam({p}, cfg);
    adam.set_learning_rate(adam.learning_rate() * Real(0.75));
    CHECK(adam.learning_rate() == doctest::Approx(1.5e-3));
  }
}

}  // TEST_SUITE
