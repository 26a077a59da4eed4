#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssagan/tensor.hpp"

namespace ssagan::image_io {

/// 8-bit PNG, interleaved channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

/// (3,H,W) in [-1,1] -> RGB bytes via (v+1)/2*255, rounded and clamped.
Image8 rgb_from_tensor(const Tensor& chw);
/// (H,W) or (1,H,W) in [0,1] -> gray bytes via v*255.
Image8 gray_from_tensor(const Tensor& hw);
/// RGB bytes -> (3,H,W) in [-1,1].
Tensor tensor_from_rgb(const Image8& image);

/// Tiles equally sized images left to right, top to bottom.
Image8 grid(const std::vector<Image8>& tiles, int columns, int gap = 2);

}  // namespace ssagan::image_io
