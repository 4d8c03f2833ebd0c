#pragma once

#include <cstddef>
#include <vector>

namespace artic {

/// Dense H x W x C image, row-major with channels innermost.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  double& at(int y, int x, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const double* ptr(int y, int x) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
  double* ptr(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
  double* pixel(std::size_t idx) { return data.data() + idx * channels; }
  const double* pixel(std::size_t idx) const { return data.data() + idx * channels; }
};

/// Boolean H x W mask.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> data;

  Mask() = default;
  Mask(int h, int w, bool fill = false)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  bool at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
};

}  // namespace artic
