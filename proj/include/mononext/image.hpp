#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mononext {

/// 8-bit RGB image, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  bool empty() const { return pixels.empty(); }
  std::uint8_t& at(int row, int col, int ch) {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  std::uint8_t at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  bool operator==(const Image&) const = default;
};

Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

Image resize_bilinear(const Image& image, int width, int height);
Image mirror_horizontal(const Image& image);

/// Interleaved RGB floats scaled to [0, 1], appended to `out`.
void append_normalized(const Image& image, std::vector<float>& out);

}  // namespace mononext
