#include "evfield/pipeline.hpp"

#include <cmath>

namespace evf::pipeline {

namespace {

EventStream finish(EventGenerator& gen, double t0, double t1, const SensorConfig& cfg) {
  EventStream s = gen.finish();
  s.span = TimeSpan{std::llround(t0 * 1e6), std::llround(t1 * 1e6) + 1};
  s = add_noise(s, cfg);
  return apply_bandwidth_limit(s, cfg);
}

}  // namespace

EventStream simulate_galvo(const LayeredScene& scene, const ScanCurve& curve, double t0, double t1,
                           double sample_rate, const SensorConfig& cfg) {
  EventGenerator gen(scene.width, scene.height, cfg);
  double last = t0;
  temporal_mux_each(scene, curve, t0, t1, sample_rate, [&](TimedImage&& f) {
    gen.push(f.t, brightness(f.image, cfg.log_floor));
    last = f.t;
  });
  EventStream s = finish(gen, t0, last, cfg);
  s.scan = curve;
  return s;
}

LayeredScene tile_scene(const LayeredScene& scene, const MosaicLayout& layout) {
  layout.validate();
  if (layout.nx != layout.ny) throw DomainError("spatial capture: needs as many views across as down");
  if (layout.rx != scene.width || layout.ry != scene.height)
    throw DomainError("spatial capture: layout resolution differs from the scene's sensor size");
  return downscale_scene(scene, layout.nx);
}

std::vector<ViewOffset> spatial_views(const MosaicLayout& layout, double pitch) {
  return grid_views(layout.nx, layout.ny, pitch);
}

EventStream simulate_spatial(const LayeredScene& scene, const MosaicLayout& layout, double pitch,
                             double t0, double t1, double sample_rate, const SensorConfig& cfg) {
  const LayeredScene tiles = tile_scene(scene, layout);
  const auto views = spatial_views(layout, pitch);
  EventGenerator gen(layout.rx, layout.ry, cfg);
  const auto times = scan_sample_times(t0, t1, sample_rate);
  for (double t : times)
    gen.push(t, brightness(spatial_mux(render_lightfield(tiles, views, t), layout), cfg.log_floor));
  EventStream s = finish(gen, t0, times.back(), cfg);
  s.layout = layout;
  return s;
}

Grid<double> galvo_brightness(const LayeredScene& scene, const ScanCurve& curve, double t, double log_floor) {
  return brightness(render_view(scene, scan_eval(curve, t), t), log_floor);
}

LightField galvo_lightfield(const EventStream& stream, const ScanCurve& curve, int bins, long long period,
                            const FrameRequest& base) {
  curve.validate();
  FrameRequest req = base;
  req.timestamps.clear();
  LightField lf;
  for (double tc : bin_centers(curve, bins, period)) {
    req.timestamps.push_back(std::llround(tc * 1e6));
    lf.views.push_back(scan_eval(curve, tc));
  }
  for (auto& f : integrate_events(stream, req)) lf.images.emplace_back(f.grid);
  lf.timestamp = static_cast<double>(period) * curve.period;
  return lf;
}

LightField spatial_lightfield(const EventStream& stream, const MosaicLayout& layout, double pitch,
                              std::int64_t t_us, const FrameRequest& base) {
  FrameRequest req = base;
  req.timestamps = {t_us};
  const auto frames = integrate_events(stream, req);
  LightField lf = spatial_demux(Image(frames.front().grid), layout, spatial_views(layout, pitch));
  lf.timestamp = frames.front().t;
  return lf;
}

std::vector<std::int64_t> frame_times(std::int64_t t0, std::int64_t t1, std::int64_t step) {
  if (step <= 0) throw DomainError("frame_times: step must be positive");
  std::vector<std::int64_t> out;
  for (std::int64_t t = t0; t <= t1; t += step) out.push_back(t);
  return out;
}

}  // namespace evf::pipeline
