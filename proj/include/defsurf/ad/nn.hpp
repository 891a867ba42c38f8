#pragma once

#include <vector>

#include "defsurf/ad/ops.hpp"

namespace defsurf::ad {

enum class Activation { Softplus, Relu };

struct MlpConfig {
  Index input = 0;
  std::vector<Index> hidden;
  Index output = 0;
  Activation activation = Activation::Softplus;
};

// Affine + activation stack with a linear final layer. Weights are stored as
// (in x out) so a batch forward is `x * W + b`.
struct Mlp {
  MlpConfig config;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  // Hidden layers get fan-in scaled normal init; the output layer is zeroed
  // when `zero_output_layer` (residual identity start).
  static Mlp init(const MlpConfig& config, std::uint64_t seed,
                  bool zero_output_layer);

  Tensor forward(const Tensor& input) const;

  std::vector<Tensor> parameters() const;
  void set_requires_grad(bool enabled);
  Index parameter_count() const;
};

struct AdamConfig {
  Real lr = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
  // Skip (and count) steps with non-finite gradients instead of throwing.
  bool skip_non_finite = true;
};

// Standard bias-corrected Adam over a fixed parameter group.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  // Applies one update from the accumulated grads; parameters without an
  // accumulated grad are treated as zero-gradient (left unchanged).
  // Returns false when the step was skipped due to non-finite gradients.
  bool step();
  void zero_grad();

  Real learning_rate() const { return config_.lr; }
  void set_learning_rate(Real lr) { config_.lr = lr; }
  long step_count() const { return step_count_; }
  long skipped_count() const { return skipped_count_; }

  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }
  void restore(long step_count, std::vector<Mat> m, std::vector<Mat> v);

 private:
  AdamConfig config_;
  std::vector<Tensor> params_;
  std::vector<Mat> m_, v_;
  long step_count_ = 0;
  long skipped_count_ = 0;
};

}  // namespace defsurf::ad
