#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pollisim {

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB raster, row-major.
struct Image {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> data;  // 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = pixel(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

/// Binary portable pixmap (P6, maxval 255).
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);

}  // namespace pollisim
