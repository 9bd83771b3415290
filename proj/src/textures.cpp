#include "evfield/textures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace evf::textures {

namespace {

void blur_inplace(Grid<double>& g, double sigma) {
  if (!(sigma > 0.0)) return;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int w = g.width(), h = g.height();
  Grid<double> tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * g(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1));
      g(x, y) = s;
    }
}

Image rescaled(const Grid<double>& g, double low, double high) {
  const auto [mn, mx] = std::minmax_element(g.data().begin(), g.data().end());
  const double lo = *mn, span = *mx - *mn;
  Image out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i)
    out.data()[i] = span > 0.0 ? low + (high - low) * (g[i] - lo) / span : low;
  return out;
}

}  // namespace

Image noise(int width, int height, std::uint64_t seed, double low, double high, double sigma) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid<double> g(width, height);
  for (auto& v : g.storage()) v = u(rng);
  blur_inplace(g, sigma);
  return rescaled(g, low, high);
}

Image blocks(int width, int height, std::uint64_t seed, int cell, double low, double high) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(low, high);
  const int cw = (width + cell - 1) / cell, ch = (height + cell - 1) / cell;
  std::vector<double> cells(static_cast<std::size_t>(cw) * ch);
  for (auto& c : cells) c = u(rng);
  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y) = cells[static_cast<std::size_t>(y / cell) * cw + x / cell];
  return out;
}

Image grid(int width, int height, int period, int line_width, double line, double bright) {
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const double hy = (y % period) < line_width ? line : 1.0;
    for (int x = 0; x < width; ++x) {
      const double vx = (x % period) < line_width ? line : 1.0;
      out.at(x, y) = bright * hy * vx;
    }
  }
  return out;
}

Image constant(int width, int height, double value) { return Image(width, height, 1, value); }

Grid<double> rect_alpha(int width, int height, int x0, int y0, int x1, int y1) {
  Grid<double> a(width, height, 0.0);
  for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(width, x1); ++x) a(x, y) = 1.0;
  return a;
}

Grid<double> disk_alpha(int width, int height, double cx, double cy, double radius) {
  Grid<double> a(width, height, 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      a(x, y) = std::clamp(radius + 0.5 - d, 0.0, 1.0);
    }
  return a;
}

}  // namespace evf::textures
