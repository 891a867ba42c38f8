#pragma once

#include <filesystem>
#include <vector>

#include "defsurf/common.hpp"

namespace defsurf::render {

// Row-major float image with interleaved channels. The .f32 container is a
// small header (magic, width, height, channels) followed by little-endian
// float32 data; it carries every loss-bearing buffer.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }

  void save_f32(const std::filesystem::path& path) const;
  static ImageBuffer load_f32(const std::filesystem::path& path);

  // 8-bit PNG preview; values clamped to [0, 1]. Supports 1 and 3 channels.
  void save_png(const std::filesystem::path& path) const;
};

}  // namespace defsurf::render
