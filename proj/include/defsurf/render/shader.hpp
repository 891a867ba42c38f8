#pragma once

#include "defsurf/ad/nn.hpp"
#include "defsurf/render/rasterizer.hpp"

namespace defsurf::render {

struct ShaderConfig {
  Index z_width = 128;
  Index hidden = 256;
  int hidden_layers = 3;
  int view_octaves = 4;
  int normal_octaves = 3;
  bool use_geometry_shader = true;

  Index feature_input_width() const {
    return 3 + 6 * normal_octaves + 6 * view_octaves + z_width;
  }
  Index geometry_input_width() const {
    return 3 + 6 * normal_octaves + 6 * view_octaves + 3;
  }
};

// Dual deferred shaders. The feature shader h_z maps (x, gamma_n(n),
// gamma_w(w), z) to a base RGB; the geometry shader h_g maps (x, gamma_n(n),
// gamma_w(w), detach(base)) to the final RGB. Outputs are squashed to [0,1]
// with a sigmoid.
struct ShaderPair {
  ShaderConfig config;
  ad::Mlp feature_shader;
  ad::Mlp geometry_shader;

  static ShaderPair init(const ShaderConfig& config, std::uint64_t seed);
  std::vector<ad::Tensor> feature_parameters() const {
    return feature_shader.parameters();
  }
  std::vector<ad::Tensor> geometry_parameters() const {
    return geometry_shader.parameters();
  }
};

struct ShadeResult {
  ad::Tensor base;   // M x 3, h_z output
  ad::Tensor final;  // M x 3, h_g output (== base when h_g is disabled)
};

// Shades the G-buffer rows selected by `rows` (indices into the covered
// pixel list). Gradients of `final` flow through geometry channels but not
// through `base` (detach boundary).
ShadeResult shade(const GBuffer& gbuffer, const std::vector<int>& rows,
                  const Camera& camera, const ShaderPair& shaders);

}  // namespace defsurf::render
