#include "defsurf/render/shader.hpp"

#include "defsurf/encode/encoding.hpp"

namespace defsurf::render {

ShaderPair ShaderPair::init(const ShaderConfig& config, std::uint64_t seed) {
  ShaderPair pair;
  pair.config = config;
  ad::MlpConfig feature;
  feature.input = config.feature_input_width();
  feature.hidden.assign(static_cast<std::size_t>(config.hidden_layers),
                        config.hidden);
  feature.output = 3;
  feature.activation = ad::Activation::Relu;
  pair.feature_shader =
      ad::Mlp::init(feature, rng::derive_seed(seed, "shader_hz"), true);

  ad::MlpConfig geometry = feature;
  geometry.input = config.geometry_input_width();
  pair.geometry_shader =
      ad::Mlp::init(geometry, rng::derive_seed(seed, "shader_hg"), true);
  return pair;
}

ShadeResult shade(const GBuffer& gbuffer, const std::vector<int>& rows,
                  const Camera& camera, const ShaderPair& shaders) {
  if (gbuffer.feature.cols() != shaders.config.z_width)
    throw ConfigError("shade: G-buffer feature width " +
                      std::to_string(gbuffer.feature.cols()) +
                      " does not match shader z_width " +
                      std::to_string(shaders.config.z_width));

  const ad::Tensor x = ad::gather_rows(gbuffer.position, rows);
  const ad::Tensor n = ad::gather_rows(gbuffer.normal, rows);
  const ad::Tensor z = ad::gather_rows(gbuffer.feature, rows);

  // View direction from the surface point toward the camera center.
  Mat center_row(1, 3);
  center_row.row(0) = camera.center().transpose();
  const ad::Tensor view = ad::normalize_rows(
      ad::sub(ad::Tensor::constant(std::move(center_row)), x));

  const ad::Tensor enc_n =
      encode::octave_encode_t(n, shaders.config.normal_octaves);
  const ad::Tensor enc_view =
      encode::octave_encode_t(view, shaders.config.view_octaves);

  ShadeResult result;
  result.base = ad::sigmoid(shaders.feature_shader.forward(
      ad::concat_cols({x, enc_n, enc_view, z})));
  if (shaders.config.use_geometry_shader) {
    result.final = ad::sigmoid(shaders.geometry_shader.forward(
        ad::concat_cols({x, enc_n, enc_view, ad::detach(result.base)})));
  } else {
    result.final = result.base;
  }
  return result;
}

}  // namespace defsurf::render
