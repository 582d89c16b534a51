#include "handfk/png_io.hpp"

#include "handfk/errors.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

namespace handfk {

namespace {

constexpr const char* kModule = "png";

struct FileCloser {
  void operator()(std::FILE* f) const {
    std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw RuntimeFailure(kModule, "cannot open '" + path + "'");
  }
  return f;
}

// Reads any PNG into 8- or 16-bit samples of the requested layout. Returns
// false if libpng reported an error.
template <typename T>
bool read_impl(std::FILE* fp, int want_color, int want_depth, Image<T>& img) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != want_color || depth != want_depth) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (depth == 16) {
    png_set_swap(png);  // libpng hands out big-endian samples
  }
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.data.assign(static_cast<std::size_t>(img.width) * img.height * img.channels, T{});
  rows.resize(img.height);
  for (int r = 0; r < img.height; ++r) {
    rows[r] = reinterpret_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(r) * img.width * img.channels);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

template <typename T>
bool write_impl(std::FILE* fp, int color, int depth, const Image<T>& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(
      png, info, img.width, img.height, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
      PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) {
    png_set_swap(png);
  }
  for (int r = 0; r < img.height; ++r) {
    rows[r] = reinterpret_cast<png_bytep>(
        const_cast<T*>(img.data.data() + static_cast<std::size_t>(r) * img.width * img.channels));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

template <typename T>
void check_layout(const Image<T>& img, int channels, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 || img.channels != channels ||
      img.data.size() != static_cast<std::size_t>(img.width) * img.height * channels) {
    throw ValidationError(kModule, path + ": image buffer does not match its dimensions");
  }
}

} // namespace

Image<std::uint16_t> read_png_gray16(const std::string& path) {
  auto f = open_file(path, "rb");
  Image<std::uint16_t> img;
  if (!read_impl(f.get(), PNG_COLOR_TYPE_GRAY, 16, img)) {
    throw RuntimeFailure(kModule, path + ": not a readable 16-bit grayscale PNG");
  }
  return img;
}

void write_png_gray16(const std::string& path, const Image<std::uint16_t>& img) {
  check_layout(img, 1, path);
  auto f = open_file(path, "wb");
  if (!write_impl(f.get(), PNG_COLOR_TYPE_GRAY, 16, img)) {
    throw RuntimeFailure(kModule, path + ": write failed");
  }
}

Image<std::uint8_t> read_png_rgb8(const std::string& path) {
  auto f = open_file(path, "rb");
  Image<std::uint8_t> img;
  if (!read_impl(f.get(), PNG_COLOR_TYPE_RGB, 8, img)) {
    throw RuntimeFailure(kModule, path + ": not a readable 8-bit RGB PNG");
  }
  return img;
}

void write_png_rgb8(const std::string& path, const Image<std::uint8_t>& img) {
  check_layout(img, 3, path);
  auto f = open_file(path, "wb");
  if (!write_impl(f.get(), PNG_COLOR_TYPE_RGB, 8, img)) {
    throw RuntimeFailure(kModule, path + ": write failed");
  }
}

} // namespace handfk
