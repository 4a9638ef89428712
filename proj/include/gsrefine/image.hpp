#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gsrefine {

/// Planar RGB image, channels in [0, 1]. Planar layout keeps the per-row
/// kernels (color transform, luminance) straightforwardly vectorizable.
struct Image {
  int width = 0, height = 0;
  std::vector<double> r, g, b;

  Image() = default;
  Image(int w, int h)
      : width(w), height(h), r(size_t(w) * h, 0.0), g(size_t(w) * h, 0.0),
        b(size_t(w) * h, 0.0) {}

  bool empty() const { return width == 0 || height == 0; }
  std::size_t npixels() const { return std::size_t(width) * height; }
  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

/// Per-pixel depth with validity mask (row-major, same indexing as Image).
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), depth(size_t(w) * h, 0.0),
        valid(size_t(w) * h, 0) {}

  std::size_t idx(int x, int y) const { return std::size_t(y) * width + x; }
};

/// 8-bit binary PPM (P6).
void save_ppm(const Image& img, const std::filesystem::path& path);
Image load_ppm(const std::filesystem::path& path);

/// Depth raster: 16-byte header `DPTH v1 <W> <H>` (NUL padded) followed by
/// W*H little-endian 32-bit floats, row major. Invalid pixels are written
/// as negative values.
void save_depth(const DepthMap& d, const std::filesystem::path& path);
DepthMap load_depth(const std::filesystem::path& path);

}  // namespace gsrefine
