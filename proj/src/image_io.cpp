#include "ssagan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "ssagan/error.hpp"

namespace ssagan::image_io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(Real v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ContractError("write_png: 1 or 3 channels");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto stride = static_cast<std::size_t>(image.width * image.channels);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  Image8 image;
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = static_cast<int>(png_get_channels(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  image.pixels.resize(stride * static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) png_read_row(png, image.pixels.data() + stride * static_cast<std::size_t>(y), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image8 rgb_from_tensor(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw InputError("rgb_from_tensor expects (3,H,W)");
  Image8 img{static_cast<int>(chw.dim(2)), static_cast<int>(chw.dim(1)), 3, {}};
  const std::int64_t plane = chw.dim(1) * chw.dim(2);
  img.pixels.resize(static_cast<std::size_t>(plane * 3));
  for (std::int64_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) img.pixels[static_cast<std::size_t>(p * 3 + c)] = to_byte((chw[c * plane + p] + 1.0) * 0.5 * 255.0);
  return img;
}

Image8 gray_from_tensor(const Tensor& hw) {
  if (!(hw.rank() == 2 || (hw.rank() == 3 && hw.dim(0) == 1))) throw InputError("gray_from_tensor expects (H,W)");
  const int h = static_cast<int>(hw.dim(-2)), w = static_cast<int>(hw.dim(-1));
  Image8 img{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h))};
  for (std::int64_t p = 0; p < hw.numel(); ++p) img.pixels[static_cast<std::size_t>(p)] = to_byte(hw[p] * 255.0);
  return img;
}

Tensor tensor_from_rgb(const Image8& image) {
  if (image.channels != 3) throw InputError("expected an RGB image");
  const std::int64_t plane = static_cast<std::int64_t>(image.width) * image.height;
  std::vector<Real> values(static_cast<std::size_t>(plane * 3));
  for (std::int64_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c)
      values[static_cast<std::size_t>(c * plane + p)] = image.pixels[static_cast<std::size_t>(p * 3 + c)] / 255.0 * 2.0 - 1.0;
  return Tensor(Shape{3, image.height, image.width}, std::move(values));
}

Image8 grid(const std::vector<Image8>& tiles, int columns, int gap) {
  if (tiles.empty()) throw InputError("grid of zero images");
  const Image8& first = tiles.front();
  for (const auto& t : tiles)
    if (t.width != first.width || t.height != first.height || t.channels != first.channels)
      throw InputError("grid tiles must share size and channels");
  columns = std::max(1, std::min(columns, static_cast<int>(tiles.size())));
  const int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
  Image8 out;
  out.channels = first.channels;
  out.width = columns * first.width + (columns - 1) * gap;
  out.height = rows * first.height + (rows - 1) * gap;
  out.pixels.assign(static_cast<std::size_t>(out.width * out.height * out.channels), 255);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int ox = static_cast<int>(i) % columns * (first.width + gap);
    const int oy = static_cast<int>(i) / columns * (first.height + gap);
    for (int y = 0; y < first.height; ++y)
      std::copy_n(tiles[i].pixels.data() + static_cast<std::size_t>(y * first.width * first.channels),
                  first.width * first.channels,
                  out.pixels.data() + static_cast<std::size_t>(((oy + y) * out.width + ox) * out.channels));
  }
  return out;
}

}  // namespace ssagan::image_io
