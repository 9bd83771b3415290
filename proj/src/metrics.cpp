#include "evfield/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "evfield/error.hpp"

namespace evf::metrics {

namespace {

void check_shape(const Grid<double>& g, const Mask& m) {
  if (g.width() != m.width() || g.height() != m.height()) throw DomainError("metrics: mask size mismatch");
}

}  // namespace

Mask rect_mask(int width, int height, int x0, int y0, int x1, int y1) {
  Mask m(width, height, 0);
  for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(width, x1); ++x) m(x, y) = 1;
  return m;
}

Mask erode(const Mask& m, int r) {
  if (r <= 0) return m;
  const int w = m.width(), h = m.height();
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      bool keep = x - r >= 0 && y - r >= 0 && x + r < w && y + r < h;
      for (int j = y - r; keep && j <= y + r; ++j)
        for (int i = x - r; keep && i <= x + r; ++i) keep = m(i, j) != 0;
      out(x, y) = keep ? 1 : 0;
    }
  return out;
}

Mask intersect(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw DomainError("metrics: mask size mismatch");
  Mask out(a.width(), a.height(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

Mask layer_mask(const LayeredScene& scene, int index, ViewOffset view, double time, double min_coverage) {
  if (index < -1 || index >= static_cast<int>(scene.layers.size())) throw DomainError("layer_mask: bad layer index");
  LayeredScene ind = scene;
  auto paint = [](SceneLayer& l, double v) {
    l.texture = Image(l.texture.width(), l.texture.height(), l.texture.channels(), v);
  };
  paint(ind.background, index == -1 ? 1.0 : 0.0);
  for (int i = 0; i < static_cast<int>(ind.layers.size()); ++i) paint(ind.layers[i], i == index ? 1.0 : 0.0);
  const Grid<double> cover = luminance(render_view(ind, view, time));
  Mask m(scene.width, scene.height, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = cover[i] >= min_coverage ? 1 : 0;
  return m;
}

Grid<double> laplacian(const Grid<double>& g) {
  const int w = g.width(), h = g.height();
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      out(x, y) = g(xm, y) + g(xp, y) + g(x, ym) + g(x, yp) - 4.0 * g(x, y);
    }
  }
  return out;
}

double laplacian_energy(const Grid<double>& g, const Mask& m) {
  check_shape(g, m);
  const Grid<double> l = laplacian(g);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (m[i]) {
      s += l[i] * l[i];
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

double mean_sharpness(const Grid<double>& g, const Mask& m, int window) {
  check_shape(g, m);
  const Grid<double> s = sharpness(Image(g), window);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (m[i]) {
      acc += s[i];
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

OrientedEnergy sobel_energy(const Grid<double>& g, const Mask& m) {
  check_shape(g, m);
  const int w = g.width(), h = g.height();
  auto at = [&](int x, int y) { return g(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  OrientedEnergy e;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      e.vertical += gx * gx;
      e.horizontal += gy * gy;
    }
  return e;
}

double projected_detail(const Grid<double>& recon, const Grid<double>& truth, const Mask& m) {
  check_shape(recon, m);
  check_shape(truth, m);
  const Grid<double> lr = laplacian(recon), lt = laplacian(truth);
  double dot = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < lr.size(); ++i)
    if (m[i]) {
      dot += lr[i] * lt[i];
      tt += lt[i] * lt[i];
    }
  return tt > 0.0 ? dot / std::sqrt(tt) : 0.0;
}

Grid<double> local_std(const Grid<double>& g, int window) {
  if (window < 1 || window % 2 == 0) throw DomainError("local_std: window must be odd and positive");
  const int w = g.width(), h = g.height(), r = window / 2;
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j)
        for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
          s += g(i, j);
          s2 += g(i, j) * g(i, j);
          ++n;
        }
      const double mean = s / n;
      out(x, y) = std::sqrt(std::max(0.0, s2 / n - mean * mean));
    }
  return out;
}

double contrast_fraction(const Grid<double>& g, const Mask& m, int window, double threshold) {
  check_shape(g, m);
  const Grid<double> sd = local_std(g, window);
  std::size_t hit = 0, n = 0;
  for (std::size_t i = 0; i < sd.size(); ++i)
    if (m[i]) {
      ++n;
      if (sd[i] > threshold) ++hit;
    }
  return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

}  // namespace evf::metrics
