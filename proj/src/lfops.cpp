#include "evfield/lfops.hpp"

#include <cmath>
#include <string>

namespace evf {

void FocalStack::validate() const {
  if (slices.empty()) throw DomainError("focal stack is empty");
  for (std::size_t i = 0; i < slices.size(); ++i) {
    if (!slices[i].image.same_shape(slices.front().image))
      throw DomainError("focal stack slices differ in shape");
    if (i > 0 && !(slices[i].depth > slices[i - 1].depth))
      throw DomainError("focal stack depths must be strictly increasing");
  }
}

Image refocus_shift(const LightField& lf, double shift) {
  if (lf.size() == 0) throw DomainError("refocus: empty light field");
  lf.validate();
  if (shift == 0.0) return integrate_aperture(lf);
  const Image& first = lf.images.front();
  const int w = first.width(), h = first.height(), nc = first.channels();
  const double inv = 1.0 / static_cast<double>(lf.size());
  Image out(w, h, nc);
  // row at a time, one view after another, so each view is read in order
#pragma omp parallel
  {
    std::vector<double> acc(static_cast<std::size_t>(w) * nc);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t v = 0; v < lf.size(); ++v) {
        const ViewOffset o = lf.views[v];
        const Image& img = lf.images[v];
        const double sy = y + shift * o.t;
        for (int x = 0; x < w; ++x)
          for (int c = 0; c < nc; ++c) acc[static_cast<std::size_t>(x) * nc + c] += img.sample(x + shift * o.s, sy, c);
      }
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < nc; ++c) {
          const double s = acc[static_cast<std::size_t>(x) * nc + c];
          out.at(x, y, c) = lf.size() == 1 ? s : s * inv;
        }
    }
  }
  return out;
}

Image refocus(const LightField& lf, double d, double d0, double A) {
  if (!(d > 0.0)) throw DomainError("refocus: depth must be positive");
  return refocus_shift(lf, layer_disparity(d, d0, A));
}

FocalStack focal_stack(const LightField& lf, std::span<const double> depths, double d0, double A) {
  if (depths.empty()) throw DomainError("focal_stack: no depths");
  for (std::size_t i = 1; i < depths.size(); ++i)
    if (!(depths[i] > depths[i - 1])) throw DomainError("focal_stack: depths must be sorted ascending");
  FocalStack stack;
  stack.slices.resize(depths.size());
  for (std::size_t i = 0; i < depths.size(); ++i)
    stack.slices[i] = {depths[i], refocus(lf, depths[i], d0, A)};
  return stack;
}

Grid<double> sharpness(const Image& img, int window) {
  if (window < 3 || window % 2 == 0) throw DomainError("sharpness: window must be odd and >= 3");
  const int w = img.width(), h = img.height();
  if (window > w || window > h) throw DomainError("sharpness: window larger than image");
  const Grid<double> lum = luminance(img);
  const int r = window / 2;

  // Laplacian with edge clamp; also its square
  Grid<double> lap(w, h), lap2(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double v = lum(xm, y) + lum(xp, y) + lum(x, ym) + lum(x, yp) - 4.0 * lum(x, y);
      lap(x, y) = v;
      lap2(x, y) = v * v;
    }
  }

  // separable clipped box sums: horizontal pass, then vertical
  Grid<double> hs(w, h), hs2(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double s = 0.0, s2 = 0.0;
    for (int x = 0; x <= std::min(r, w - 1); ++x) {
      s += lap(x, y);
      s2 += lap2(x, y);
    }
    for (int x = 0; x < w; ++x) {
      hs(x, y) = s;
      hs2(x, y) = s2;
      if (x + r + 1 < w) {
        s += lap(x + r + 1, y);
        s2 += lap2(x + r + 1, y);
      }
      if (x - r >= 0) {
        s -= lap(x - r, y);
        s2 -= lap2(x - r, y);
      }
    }
  }
  Grid<double> out(w, h);
#pragma omp parallel for schedule(static)
  for (int x = 0; x < w; ++x) {
    double s = 0.0, s2 = 0.0;
    for (int y = 0; y <= std::min(r, h - 1); ++y) {
      s += hs(x, y);
      s2 += hs2(x, y);
    }
    const int nx = std::min(x + r, w - 1) - std::max(x - r, 0) + 1;
    for (int y = 0; y < h; ++y) {
      const int ny = std::min(y + r, h - 1) - std::max(y - r, 0) + 1;
      const double n = static_cast<double>(nx * ny);
      const double mean = s / n;
      out(x, y) = std::max(0.0, s2 / n - mean * mean);
      if (y + r + 1 < h) {
        s += hs(x, y + r + 1);
        s2 += hs2(x, y + r + 1);
      }
      if (y - r >= 0) {
        s -= hs(x, y - r);
        s2 -= hs2(x, y - r);
      }
    }
  }
  return out;
}

namespace {

// Vertex abscissa of the parabola through three points, clamped to [x0, x2].
double parabola_peak(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
  const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
  if (den == 0.0 || !std::isfinite(num / den)) return x1;
  return std::clamp(x1 - 0.5 * num / den, x0, x2);
}

}  // namespace

DepthMap depth_from_focus(const FocalStack& stack, double min_contrast, int window) {
  stack.validate();
  const std::size_t n = stack.slices.size();
  if (n < 2) throw DomainError("depth_from_focus: need at least two slices");
  std::vector<Grid<double>> sharp(n);
  for (std::size_t i = 0; i < n; ++i) sharp[i] = sharpness(stack.slices[i].image, window);

  const int w = sharp.front().width(), h = sharp.front().height();
  DepthMap map{Grid<double>(w, h, DepthMap::kInvalid), Grid<double>(w, h, 0.0),
               Grid<std::int32_t>(w, h, -1)};
  std::vector<double> logd(n);
  for (std::size_t i = 0; i < n; ++i) logd[i] = std::log(stack.slices[i].depth);

  const auto npix = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(w) * h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < npix; ++p) {
    const auto idx = static_cast<std::size_t>(p);
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (sharp[i][idx] > sharp[best][idx]) best = i;
    const double top = sharp[best][idx];
    if (!(top > 0.0) || top < min_contrast) continue;
    double second = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (i != best) second = std::max(second, sharp[i][idx]);
    double ld = logd[best];
    if (best > 0 && best + 1 < n)
      ld = parabola_peak(logd[best - 1], sharp[best - 1][idx], logd[best], top, logd[best + 1],
                         sharp[best + 1][idx]);
    map.depth[idx] = std::clamp(std::exp(ld), stack.slices.front().depth, stack.slices.back().depth);
    map.confidence[idx] = 1.0 - second / top;
    map.slice[idx] = static_cast<std::int32_t>(best);
  }
  return map;
}

DepthEstimate disparity_to_depth(double disparity, const DepthFit& fit) {
  return {fit.slope * disparity + fit.intercept,
          disparity >= fit.disparity_min && disparity <= fit.disparity_max};
}

}  // namespace evf
