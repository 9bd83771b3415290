#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "evfield/error.hpp"

namespace evf {

/// Dense row-major 2D array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DomainError("Grid: negative dimension");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }

  bool same_shape(const Grid& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }
  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Radiance image with interleaved channels (1 = monochrome, 3 = RGB).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0) throw DomainError("Image: negative dimension");
    if (channels != 1 && channels != 3) throw DomainError("Image: channels must be 1 or 3");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  explicit Image(const Grid<double>& g) : Image(g.width(), g.height(), 1) {
    std::copy(g.data().begin(), g.data().end(), data_.begin());
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y, int c = 0) noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const noexcept {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  // Bilinear sample with edge-clamp boundary. Integer coordinates inside the
  // image return the stored sample exactly.
  double sample(double x, double y, int c = 0) const noexcept {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const double fx = x - x0;
    const double fy = y - y0;
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double top = fx == 0.0 ? at(x0, y0, c) : (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
    if (fy == 0.0) return top;
    const double bot = fx == 0.0 ? at(x0, y1, c) : (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
    return (1.0 - fy) * top + fy * bot;
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// Channel mean as a single-channel grid.
inline Grid<double> luminance(const Image& img) {
  Grid<double> out(img.width(), img.height());
  const int nc = img.channels();
  auto src = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (nc == 1) {
      out[i] = src[i];
    } else {
      double s = 0.0;
      for (int c = 0; c < nc; ++c) s += src[i * nc + c];
      out[i] = s / nc;
    }
  }
  return out;
}

/// A grid tagged with a time in seconds.
struct TimedGrid {
  double t = 0.0;
  Grid<double> grid;
};

struct TimedImage {
  double t = 0.0;
  Image image;
};

}  // namespace evf
