#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topoconv/metrics.hpp"
#include "topoconv/tensor.hpp"

namespace topoconv {

/// 8-bit grayscale raster as stored in binary PGM (P5).
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  // [H,W] tensor of pixel/255.
  Tensor to_unit_tensor() const;
  // Foreground iff pixel >= 128.
  BinaryMask to_mask() const;

  // Values are clamped to [0,1] and rounded to the nearest of 256 levels.
  static GrayImage from_unit(std::size_t height, std::size_t width, std::span<const double> values);
  static GrayImage from_mask(const BinaryMask& mask);
};

GrayImage read_pgm(const std::string& path);
GrayImage parse_pgm(const std::string& bytes);
// `comments` become `# ...` header lines.
std::string encode_pgm(const GrayImage& image, const std::vector<std::string>& comments = {});
void write_pgm(const std::string& path, const GrayImage& image, const std::vector<std::string>& comments = {});

}  // namespace topoconv
