#include <algorithm>

#include "evfield/reference.hpp"

namespace evf::reference {

Image refocus_shift(const LightField& lf, double shift) {
  if (lf.size() == 0) throw DomainError("refocus: empty light field");
  lf.validate();
  if (shift == 0.0) return integrate_aperture(lf);
  const Image& first = lf.images.front();
  Image sum(first.width(), first.height(), first.channels());
  for (std::size_t v = 0; v < lf.size(); ++v) {
    const ViewOffset o = lf.views[v];
    for (int y = 0; y < sum.height(); ++y)
      for (int x = 0; x < sum.width(); ++x)
        for (int c = 0; c < sum.channels(); ++c)
          sum.at(x, y, c) += lf.images[v].sample(x + shift * o.s, y + shift * o.t, c);
  }
  if (lf.size() > 1) {
    const double inv = 1.0 / static_cast<double>(lf.size());
    for (double& s : sum.data()) s *= inv;
  }
  return sum;
}

Grid<double> sharpness(const Image& img, int window) {
  if (window < 3 || window % 2 == 0) throw DomainError("sharpness: window must be odd and >= 3");
  const int w = img.width(), h = img.height(), r = window / 2;
  if (window > w || window > h) throw DomainError("sharpness: window larger than image");
  const Grid<double> lum = luminance(img);
  auto at = [&](int x, int y) { return lum(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  Grid<double> lap(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lap(x, y) = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y);
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j)
        for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
          s += lap(i, j);
          s2 += lap(i, j) * lap(i, j);
          ++n;
        }
      const double mean = s / n;
      out(x, y) = std::max(0.0, s2 / n - mean * mean);
    }
  return out;
}

}  // namespace evf::reference
