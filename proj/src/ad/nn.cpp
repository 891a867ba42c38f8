#include "defsurf/ad/nn.hpp"

#include <cmath>
#include <string>

namespace defsurf::ad {

Mlp Mlp::init(const MlpConfig& config, std::uint64_t seed,
              bool zero_output_layer) {
  if (config.input < 1 || config.output < 1)
    throw ConfigError("Mlp: input and output widths must be positive");
  Mlp mlp;
  mlp.config = config;
  rng::Engine engine(seed);
  rng::NormalSampler normal;

  std::vector<Index> widths;
  widths.push_back(config.input);
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.output);

  for (std::size_t layer = 0; layer + 1 < widths.size(); ++layer) {
    const Index fan_in = widths[layer];
    const Index fan_out = widths[layer + 1];
    const bool is_output = layer + 2 == widths.size();
    Mat w(fan_in, fan_out);
    if (is_output && zero_output_layer) {
      w.setZero();
    } else {
      const Real scale = Real(1) / std::sqrt(static_cast<Real>(fan_in));
      for (Index r = 0; r < fan_in; ++r)
        for (Index c = 0; c < fan_out; ++c)
          w(r, c) = static_cast<Real>(normal(engine)) * scale;
    }
    mlp.weights.push_back(Tensor::parameter(std::move(w)));
    mlp.biases.push_back(Tensor::parameter(Mat::Zero(1, fan_out)));
  }
  return mlp;
}

Tensor Mlp::forward(const Tensor& input) const {
  if (input.cols() != config.input)
    throw ConfigError("Mlp::forward: input width " +
                      std::to_string(input.cols()) + " does not match " +
                      std::to_string(config.input));
  Tensor x = input;
  for (std::size_t layer = 0; layer < weights.size(); ++layer) {
    x = add(matmul(x, weights[layer]), biases[layer]);
    const bool is_output = layer + 1 == weights.size();
    if (!is_output)
      x = config.activation == Activation::Softplus ? softplus(x) : relu(x);
  }
  return x;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> params;
  params.reserve(weights.size() * 2);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    params.push_back(weights[i]);
    params.push_back(biases[i]);
  }
  return params;
}

void Mlp::set_requires_grad(bool enabled) {
  for (auto& w : weights) const_cast<Tensor&>(w).set_requires_grad(enabled);
  for (auto& b : biases) const_cast<Tensor&>(b).set_requires_grad(enabled);
}

Index Mlp::parameter_count() const {
  Index count = 0;
  for (const auto& w : weights) count += w.value().size();
  for (const auto& b : biases) count += b.value().size();
  return count;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : config_(config), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

bool Adam::step() {
  for (const Tensor& p : params_)
    if (p.has_grad() && !p.grad().allFinite()) {
      if (config_.skip_non_finite) {
        ++skipped_count_;
        return false;
      }
      throw NumericError("Adam::step: non-finite gradient");
    }

  ++step_count_;
  const Real bias1 =
      Real(1) - std::pow(config_.beta1, static_cast<Real>(step_count_));
  const Real bias2 =
      Real(1) - std::pow(config_.beta2, static_cast<Real>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const Mat grad = p.has_grad()
                         ? p.grad()
                         : Mat::Zero(p.rows(), p.cols());
    m_[i] = config_.beta1 * m_[i] + (Real(1) - config_.beta1) * grad;
    v_[i] = config_.beta2 * v_[i] +
            (Real(1) - config_.beta2) * grad.cwiseProduct(grad);
    const Mat m_hat = m_[i] / bias1;
    const Mat v_hat = v_[i] / bias2;
    p.raw_value() -= config_.lr * m_hat.cwiseQuotient(
                                      (v_hat.array().sqrt() + config_.eps)
                                          .matrix());
  }
  return true;
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Adam::restore(long step_count, std::vector<Mat> m, std::vector<Mat> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw VersionError("Adam::restore: moment count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (m[i].rows() != params_[i].rows() || m[i].cols() != params_[i].cols() ||
        v[i].rows() != params_[i].rows() || v[i].cols() != params_[i].cols())
      throw VersionError("Adam::restore: moment shape mismatch");
  step_count_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace defsurf::ad
