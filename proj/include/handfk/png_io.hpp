#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace handfk {

/// Row-major image, `channels` interleaved samples per pixel.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;
};

/// 16-bit grayscale PNG (e.g. depth in mm). Throws RuntimeFailure on I/O or
/// format errors.
Image<std::uint16_t> read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Image<std::uint16_t>& image);

/// 8-bit RGB PNG.
Image<std::uint8_t> read_png_rgb8(const std::string& path);
void write_png_rgb8(const std::string& path, const Image<std::uint8_t>& image);

} // namespace handfk
