#include "evfield/optics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace evf {

void MosaicLayout::validate() const {
  if (nx < 1 || ny < 1 || rx < 1 || ry < 1) throw DomainError("mosaic: sizes must be positive");
  if (rx % nx != 0 || ry % ny != 0)
    throw DomainError("mosaic: resolution must be a multiple of the view count");
  if (!flips.empty()) {
    if (kind != MosaicKind::kaleidoscope) throw DomainError("mosaic: flips only apply to kaleidoscopes");
    if (flips.size() != static_cast<std::size_t>(nx) * ny)
      throw DomainError("mosaic: flip pattern must have nx*ny entries");
  }
}

MosaicLayout MosaicLayout::kaleidoscope(int nx, int ny, int rx, int ry) {
  MosaicLayout l{MosaicKind::kaleidoscope, nx, ny, rx, ry, {}};
  l.flips.resize(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      l.flips[static_cast<std::size_t>(j) * nx + i] = {std::abs(i - nx / 2) % 2 == 1,
                                                       std::abs(j - ny / 2) % 2 == 1};
  l.validate();
  return l;
}

MosaicLayout MosaicLayout::microlens(int nx, int ny, int rx, int ry) {
  MosaicLayout l{MosaicKind::microlens, nx, ny, rx, ry, {}};
  l.validate();
  return l;
}

MosaicSource mosaic_source(const MosaicLayout& layout, int x, int y) {
  if (layout.kind == MosaicKind::microlens)
    return {(y % layout.ny) * layout.nx + (x % layout.nx), x / layout.nx, y / layout.ny};
  const int tw = layout.tile_width(), th = layout.tile_height();
  const int i = x / tw, j = y / th;
  const int view = j * layout.nx + i;
  int lx = x % tw, ly = y % th;
  if (!layout.flips.empty()) {
    const TileFlip f = layout.flips[view];
    if (f.x) lx = tw - 1 - lx;
    if (f.y) ly = th - 1 - ly;
  }
  return {view, lx, ly};
}

Image spatial_mux(const LightField& lf, const MosaicLayout& layout) {
  layout.validate();
  lf.validate();
  if (lf.size() != static_cast<std::size_t>(layout.view_count()))
    throw DomainError("spatial_mux: light field has " + std::to_string(lf.size()) +
                      " views, layout needs " + std::to_string(layout.view_count()));
  if (lf.width() != layout.tile_width() || lf.height() != layout.tile_height())
    throw DomainError("spatial_mux: view size must equal r/n");
  const int nc = lf.images.front().channels();
  Image out(layout.rx, layout.ry, nc);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < layout.ry; ++y)
    for (int x = 0; x < layout.rx; ++x) {
      const MosaicSource src = mosaic_source(layout, x, y);
      for (int c = 0; c < nc; ++c) out.at(x, y, c) = lf.images[src.view].at(src.x, src.y, c);
    }
  return out;
}

LightField spatial_demux(const Image& mosaic, const MosaicLayout& layout,
                         const std::vector<ViewOffset>& views) {
  layout.validate();
  if (mosaic.width() != layout.rx || mosaic.height() != layout.ry)
    throw DomainError("spatial_demux: mosaic resolution does not match layout");
  const auto n = static_cast<std::size_t>(layout.view_count());
  if (!views.empty() && views.size() != n) throw DomainError("spatial_demux: view list size mismatch");
  LightField lf;
  lf.views = views.empty() ? grid_views(layout.nx, layout.ny, 1.0) : views;
  lf.images.assign(n, Image(layout.tile_width(), layout.tile_height(), mosaic.channels()));
  const int nc = mosaic.channels();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < layout.ry; ++y)
    for (int x = 0; x < layout.rx; ++x) {
      const MosaicSource src = mosaic_source(layout, x, y);
      for (int c = 0; c < nc; ++c) lf.images[src.view].at(src.x, src.y, c) = mosaic.at(x, y, c);
    }
  return lf;
}

ScanCurve ScanCurve::circle(double radius, double frequency, double phase) {
  if (!(frequency > 0.0)) throw DomainError("circle scan: frequency must be positive");
  ScanCurve c;
  c.amplitude_s = c.amplitude_t = radius;
  c.frequency_s = c.frequency_t = frequency;
  c.phase_s = phase;
  c.phase_t = phase + std::numbers::pi / 2.0;
  c.period = 1.0 / frequency;
  return c;
}

void ScanCurve::validate() const {
  if (!(period > 0.0) || !std::isfinite(period)) throw DomainError("scan curve: period must be positive");
  for (double f : {frequency_s, frequency_t}) {
    const double cycles = f * period;
    if (!std::isfinite(cycles) || std::abs(cycles - std::round(cycles)) > 1e-9)
      throw DomainError("scan curve: frequency * period must be an integer");
  }
}

namespace {

// sin(2 pi * cycles + phase) with the integer part of `cycles` removed first.
double periodic_sin(double frequency, double t, double phase) {
  double cycles = frequency * t;
  cycles -= std::floor(cycles);
  return std::sin(2.0 * std::numbers::pi * cycles + phase);
}

}  // namespace

ViewOffset scan_eval(const ScanCurve& curve, double t) {
  const double r = std::fmod(t, curve.period);
  const double tr = r < 0.0 ? r + curve.period : r;
  return {curve.amplitude_s * periodic_sin(curve.frequency_s, tr, curve.phase_s),
          curve.amplitude_t * periodic_sin(curve.frequency_t, tr, curve.phase_t)};
}

std::vector<double> scan_sample_times(double t0, double t1, double sample_rate) {
  if (!(t1 > t0)) throw DomainError("temporal_mux: t1 must exceed t0");
  if (!(sample_rate > 0.0)) throw DomainError("temporal_mux: sample rate must be positive");
  const auto count = static_cast<long long>(std::floor((t1 - t0) * sample_rate + 1e-9)) + 1;
  std::vector<double> times(static_cast<std::size_t>(count));
  for (long long k = 0; k < count; ++k) times[k] = t0 + static_cast<double>(k) / sample_rate;
  return times;
}

void temporal_mux_each(const LayeredScene& scene, const ScanCurve& curve, double t0, double t1,
                       double sample_rate, const std::function<void(TimedImage&&)>& sink) {
  curve.validate();
  scene.validate();
  for (double t : scan_sample_times(t0, t1, sample_rate))
    sink({t, detail::render_view_unchecked(scene, scan_eval(curve, t), t)});
}

std::vector<TimedImage> temporal_mux(const LayeredScene& scene, const ScanCurve& curve, double t0,
                                     double t1, double sample_rate) {
  std::vector<TimedImage> frames;
  temporal_mux_each(scene, curve, t0, t1, sample_rate,
                    [&](TimedImage&& f) { frames.push_back(std::move(f)); });
  return frames;
}

}  // namespace evf
