#include "gsrefine/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace gsrefine {

namespace {
std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}
}  // namespace

void save_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write image: " + path.string());
  }
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(std::size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = img.idx(x, y);
      row[3 * x + 0] = to_byte(img.r[i]);
      row[3 * x + 1] = to_byte(img.g[i]);
      row[3 * x + 2] = to_byte(img.b[i]);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) {
    throw std::runtime_error("error writing image: " + path.string());
  }
}

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image: " + path.string());
  }
  std::string magic;
  in >> magic;
  if (magic != "P6") {
    throw std::runtime_error(path.string() + ": not a binary PPM (P6)");
  }
  auto next_token = [&in, &path]() -> long {
    // Skip whitespace and '#' comments between header tokens.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    if (!in) {
      throw std::runtime_error(path.string() + ": malformed PPM header");
    }
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error(path.string() + ": unsupported PPM dimensions");
  }
  in.get();  // single whitespace after maxval
  Image img(static_cast<int>(w), static_cast<int>(h));
  std::vector<std::uint8_t> row(std::size_t(w) * 3);
  for (long y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) {
      throw std::runtime_error(path.string() + ": truncated PPM data");
    }
    for (long x = 0; x < w; ++x) {
      const std::size_t i = img.idx(int(x), int(y));
      img.r[i] = row[3 * x + 0] / 255.0;
      img.g[i] = row[3 * x + 1] / 255.0;
      img.b[i] = row[3 * x + 2] / 255.0;
    }
  }
  return img;
}

void save_depth(const DepthMap& d, const std::filesystem::path& path) {
  char header[16] = {};
  const int n = std::snprintf(header, sizeof(header), "DPTH v1 %d %d",
                              d.width, d.height);
  if (n < 0 || n >= static_cast<int>(sizeof(header))) {
    throw std::runtime_error("depth raster dimensions too large for header");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write depth raster: " + path.string());
  }
  out.write(header, sizeof(header));
  std::vector<float> row(d.width);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = d.idx(x, y);
      row[x] = d.valid[i] ? static_cast<float>(d.depth[i]) : -1.0f;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              row.size() * sizeof(float));
  }
  if (!out) {
    throw std::runtime_error("error writing depth raster: " + path.string());
  }
}

DepthMap load_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open depth raster: " + path.string());
  }
  char header[17] = {};
  in.read(header, 16);
  if (!in || std::strncmp(header, "DPTH v1 ", 8) != 0) {
    throw std::runtime_error(path.string() + ": bad depth raster header");
  }
  int w = 0, h = 0;
  if (std::sscanf(header + 8, "%d %d", &w, &h) != 2 || w <= 0 || h <= 0) {
    throw std::runtime_error(path.string() + ": bad depth raster size");
  }
  DepthMap d(w, h);
  std::vector<float> row(w);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!in) {
      throw std::runtime_error(path.string() + ": truncated depth raster");
    }
    for (int x = 0; x < w; ++x) {
      const std::size_t i = d.idx(x, y);
      if (row[x] >= 0.0f) {
        d.depth[i] = row[x];
        d.valid[i] = 1;
      }
    }
  }
  return d;
}

}  // namespace gsrefine
