#include "defsurf/render/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace defsurf::render {

namespace {
constexpr char kMagic[4] = {'f', '3', '2', 'b'};
}

void ImageBuffer::save_f32(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_f32: cannot open " + path.string());
  out.write(kMagic, 4);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(width),
                                 static_cast<std::uint32_t>(height),
                                 static_cast<std::uint32_t>(channels)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("save_f32: write failed for " + path.string());
}

ImageBuffer ImageBuffer::load_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_f32: cannot open " + path.string());
  char magic[4];
  std::uint32_t dims[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("load_f32: bad header in " + path.string());
  ImageBuffer img(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                  static_cast<int>(dims[2]));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!in) throw IoError("load_f32: truncated data in " + path.string());
  return img;
}

void ImageBuffer::save_png(const std::filesystem::path& path) const {
  if (channels != 1 && channels != 3)
    throw ArgumentError("save_png: only 1 or 3 channels supported");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("save_png: cannot open " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("save_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("save_png: libpng write failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<std::size_t>(width) * channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const float v = std::min(1.0f, std::max(0.0f, at(x, y, c)));
        row[static_cast<std::size_t>(x) * channels + c] =
            static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace defsurf::render
