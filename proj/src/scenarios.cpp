#include "evfield/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "evfield/pipeline.hpp"

namespace evf::scenarios {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void shift_seeds(json& j, std::uint64_t offset) {
  if (j.is_object()) {
    if (j.contains("type") && j.contains("seed") && j["seed"].is_number_integer())
      j["seed"] = j["seed"].get<std::uint64_t>() + offset;
    for (auto& [k, v] : j.items()) shift_seeds(v, offset);
  } else if (j.is_array()) {
    for (auto& v : j) shift_seeds(v, offset);
  }
}

const SceneLayer& layer_at(const LayeredScene& s, int index) {
  if (index == -1) return s.background;
  if (index < 0 || index >= static_cast<int>(s.layers.size()))
    throw DomainError("scenario: layer index " + std::to_string(index) + " out of range");
  return s.layers[static_cast<std::size_t>(index)];
}

double disparity_of(const LayeredScene& s, int index) {
  return layer_disparity(layer_at(s, index).depth, s.focus_distance, s.disparity_constant);
}

// Refocus shifts are edge-clamped; keep measurements this far from the border
// and from occlusion boundaries.
int guard_band(const LayeredScene& s, std::span<const ViewOffset> views, double extra) {
  double worst = 0.0;
  auto consider = [&](const SceneLayer& l) {
    const double d = std::abs(layer_disparity(l.depth, s.focus_distance, s.disparity_constant));
    for (const auto& v : views) worst = std::max(worst, d * std::hypot(v.s, v.t));
  };
  consider(s.background);
  for (const auto& l : s.layers) consider(l);
  return static_cast<int>(std::ceil(worst + extra));
}

std::vector<ViewOffset> bin_views(const ScanCurve& curve, int bins) {
  std::vector<ViewOffset> v;
  for (double t : bin_centers(curve, bins, 0)) v.push_back(scan_eval(curve, t));
  return v;
}

Grid<double> refocused(const LightField& lf, double depth, double d0, double A) {
  return luminance(refocus(lf, depth, d0, A));
}

// Last scan period lying completely inside [0, duration].
long long last_period(const ScanCurve& curve, double duration) {
  const auto p = static_cast<long long>(std::floor(duration / curve.period + 1e-9)) - 1;
  if (p < 0) throw DomainError("scenario: duration shorter than one scan period");
  return p;
}

void save(const Output& out, const std::string& name, const Grid<double>& g) {
  if (out.enabled()) io::write_normalized(out.dir / name, Image(g));
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<PatchRect> patches_from_json(const json& j) {
  auto one = [](const json& p) {
    if (!p.is_array() || p.size() != 4) throw DomainError("scenario: a patch is [x, y, w, h]");
    return PatchRect{p[0].get<int>(), p[1].get<int>(), p[2].get<int>(), p[3].get<int>()};
  };
  std::vector<PatchRect> out;
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    for (const auto& p : j) out.push_back(one(p));
  } else {
    out.push_back(one(j));
  }
  return out;
}

ShiftTrack best_track(std::span<const Image> frames, const std::vector<PatchRect>& patches, int search_radius) {
  if (patches.empty()) throw DomainError("calibration: no patches");
  std::optional<ShiftTrack> best;
  for (const auto& p : patches) {
    ShiftTrack t = track_patch(frames, 0, p, search_radius);
    if (!best || t.mean_score() > best->mean_score()) best = std::move(t);
  }
  return *best;
}

// ---- configuration ---------------------------------------------------------

Scenario Scenario::load(const fs::path& path) {
  Scenario s;
  s.doc = io::read_json(path);
  s.dir = path.parent_path();
  if (!s.doc.is_object()) throw DomainError("scenario: top level must be an object");
  return s;
}

LayeredScene Scenario::scene(std::uint64_t seed_offset) const {
  json j = doc.contains("scene") ? doc["scene"] : doc;
  if (seed_offset != 0) shift_seeds(j, seed_offset);
  return io::scene_from_json(j, dir);
}

SensorConfig Scenario::sensor(std::uint64_t seed) const {
  SensorConfig c;
  c.seed = seed;
  if (!doc.contains("sensor")) return c;
  try {
    const json& j = doc["sensor"];
    if (j.contains("threshold")) c.c_pos = c.c_neg = j["threshold"].get<double>();
    c.c_pos = j.value("c_pos", c.c_pos);
    c.c_neg = j.value("c_neg", c.c_neg);
    c.refractory_us = j.value("refractory_us", c.refractory_us);
    c.log_floor = j.value("log_floor", c.log_floor);
    c.noise_rate = j.value("noise_rate", c.noise_rate);
    if (j.contains("bandwidth_cap") && !j["bandwidth_cap"].is_null())
      c.bandwidth_cap = j["bandwidth_cap"].get<double>();
  } catch (const json::exception& e) {
    throw DomainError(std::string("scenario sensor: ") + e.what());
  }
  c.validate();
  return c;
}

FrameRequest Scenario::reconstruction() const {
  FrameRequest r;
  if (!doc.contains("reconstruction")) return r;
  const json& j = doc["reconstruction"];
  r.decay = j.value("decay", r.decay);
  const std::string e = j.value("estimate", std::string("reference"));
  if (e == "reference") r.estimate = Estimate::reference;
  else if (e == "midpoint") r.estimate = Estimate::midpoint;
  else if (e == "interpolated") r.estimate = Estimate::interpolated;
  else throw DomainError("scenario: unknown estimate '" + e + "'");
  const std::string init = j.value("initial", std::string("zeros"));
  if (init != "zeros" && init != "true") throw DomainError("scenario: initial must be 'zeros' or 'true'");
  return r;
}

bool Scenario::true_initial() const {
  return doc.contains("reconstruction") && doc["reconstruction"].value("initial", std::string()) == "true";
}

const json& Scenario::section(const char* key) const {
  if (!doc.contains(key)) throw DomainError(std::string("scenario: missing '") + key + "' section");
  return doc[key];
}

GalvoSetup galvo_setup(const json& j) {
  GalvoSetup g;
  try {
    if (j.contains("curve")) {
      g.curve = io::scan_curve_from_json(j["curve"]);
    } else {
      g.curve = ScanCurve::circle(j.at("radius").get<double>(), j.at("frequency").get<double>(),
                                  j.value("phase", 0.0));
    }
    g.bins = j.value("bins", 20);
    g.sample_rate = j.contains("sample_rate") ? j["sample_rate"].get<double>() : 20.0 / g.curve.period;
  } catch (const json::exception& e) {
    throw DomainError(std::string("scenario galvo: ") + e.what());
  }
  g.curve.validate();
  if (!(g.sample_rate > 0.0)) throw DomainError("scenario galvo: sample_rate must be positive");
  return g;
}

SpatialSetup spatial_setup(const json& j, MosaicKind kind, int width, int height) {
  SpatialSetup k;
  try {
    const int n = j.at("views");
    k.layout = kind == MosaicKind::kaleidoscope ? MosaicLayout::kaleidoscope(n, n, width, height)
                                                : MosaicLayout::microlens(n, n, width, height);
    k.pitch = j.value("pitch", 1.0);
    k.sample_rate = j.at("sample_rate");
  } catch (const json::exception& e) {
    throw DomainError(std::string("scenario mosaic: ") + e.what());
  }
  if (!(k.sample_rate > 0.0)) throw DomainError("scenario mosaic: sample_rate must be positive");
  return k;
}

// ---- event-model fidelity --------------------------------------------------

FidelityRun run_fidelity(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("fidelity");
  const LayeredScene scene = sc.scene();
  SensorConfig cfg = sc.sensor(seed);
  const int frames = j.value("frames", 100);
  const double duration = j.at("duration");
  const double g0 = j.at("gain").at(0), g1 = j.at("gain").at(1);
  if (frames < 2) throw DomainError("fidelity: need at least two frames");

  std::vector<TimedGrid> seq;
  for (int k = 0; k < frames; ++k) {
    const double u = static_cast<double>(k) / (frames - 1);
    // whole microseconds, so the last frame time is an exact integration timestamp
    const double t = std::round(duration * u * 1e6) * 1e-6;
    Image img = render_view(scene, {0.0, 0.0}, t);
    for (auto& v : img.data()) v *= g0 + (g1 - g0) * u;
    seq.push_back({t, brightness(img, cfg.log_floor)});
  }
  const EventStream es = generate_events(seq, cfg);

  FrameRequest req;
  req.decay = 0.0;
  req.initial = seq.front().grid;
  req.c_pos = cfg.c_pos;
  req.c_neg = cfg.c_neg;
  req.timestamps = {std::llround(seq.back().t * 1e6)};
  const auto rec = integrate_events(es, req);

  FidelityRun r;
  r.threshold = std::min(cfg.c_pos, cfg.c_neg);
  r.events = es.size();
  Grid<double> err(scene.width, scene.height);
  for (std::size_t i = 0; i < err.size(); ++i) {
    err[i] = std::abs(rec.front().grid[i] - seq.back().grid[i]);
    r.max_error = std::max(r.max_error, err[i]);
  }
  save(out, "final_truth.pgm", seq.back().grid);
  save(out, "final_reconstruction.pgm", rec.front().grid);
  save(out, "abs_error.pgm", err);
  return r;
}

// ---- design comparison -----------------------------------------------------

CompareRun run_compare(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("compare");
  const LayeredScene base = sc.scene();
  const SensorConfig cfg = sc.sensor(seed);
  const FrameRequest req = sc.reconstruction();
  const GalvoSetup g = galvo_setup(sc.section("galvo"));
  const SpatialSetup k = spatial_setup(sc.section("kaleidoscope"), MosaicKind::kaleidoscope,
                                       base.width, base.height);
  const int obj = j.at("object_layer"), stat = j.at("static_layer");
  const double duration = j.at("duration");
  const auto speeds = j.at("speeds").get<std::vector<double>>();
  const int window = j.value("window", 7);

  const auto gviews = bin_views(g.curve, g.bins);
  const auto kviews = pipeline::spatial_views(k.layout, k.pitch);
  const int gmargin = guard_band(base, gviews, 2.0);

  CompareRun r;
  r.speeds = speeds;
  for (std::size_t si = 0; si < speeds.size(); ++si) {
    const double speed = speeds[si];
    LayeredScene scene = base;
    auto& moving = scene.layers.at(static_cast<std::size_t>(obj));
    moving.velocity = {moving.velocity.x * speed, moving.velocity.y * speed};
    moving.angular_velocity *= speed;
    const double dur = duration / speed;
    const double depth = moving.depth;

    // galvanometer: last complete scan period
    const EventStream gs = pipeline::simulate_galvo(scene, g.curve, 0.0, dur, g.sample_rate, cfg);
    const long long p = last_period(g.curve, dur);
    const LightField glf = pipeline::galvo_lightfield(gs, g.curve, g.bins, p, req);
    const Grid<double> gimg = refocused(glf, depth, scene.focus_distance, scene.disparity_constant);
    const double tmid = (static_cast<double>(p) + 0.5) * g.curve.period;
    const metrics::Mask gmask = metrics::erode(metrics::layer_mask(scene, obj, {0.0, 0.0}, tmid), gmargin);
    r.galvo_sharpness.push_back(metrics::mean_sharpness(gimg, gmask, window));
    r.galvo_events.push_back(gs.size());

    // kaleidoscope: single snapshot at the end
    const EventStream ks = pipeline::simulate_spatial(scene, k.layout, k.pitch, 0.0, dur, k.sample_rate, cfg);
    const std::int64_t tend = ks.span->end - 1;
    const LightField klf = pipeline::spatial_lightfield(ks, k.layout, k.pitch, tend, req);
    const LayeredScene tiles = pipeline::tile_scene(scene, k.layout);
    const int kmargin = guard_band(tiles, kviews, 1.0);
    const Grid<double> kimg = refocused(klf, depth, tiles.focus_distance, tiles.disparity_constant);
    const metrics::Mask kmask =
        metrics::erode(metrics::layer_mask(tiles, obj, {0.0, 0.0}, static_cast<double>(tend) * 1e-6), kmargin);
    r.spatial_sharpness.push_back(metrics::mean_sharpness(kimg, kmask, window));
    r.spatial_events.push_back(ks.size());

    const std::string sfx = tag(speed) + "x.pgm";
    save(out, "galvo_object_" + sfx, gimg);
    save(out, "kaleidoscope_object_" + sfx, kimg);

    if (si != 0) continue;
    // static layer, measured on the first (slowest) run
    const double sdepth = layer_at(scene, stat).depth;
    const Grid<double> gs_img = refocused(glf, sdepth, scene.focus_distance, scene.disparity_constant);
    const metrics::Mask gs_mask = metrics::erode(metrics::layer_mask(scene, stat, {0.0, 0.0}, 0.0), gmargin);
    r.galvo_static_energy = metrics::laplacian_energy(gs_img, gs_mask);
    const Grid<double> ks_img = refocused(klf, sdepth, tiles.focus_distance, tiles.disparity_constant);
    const metrics::Mask ks_mask = metrics::erode(metrics::layer_mask(tiles, stat, {0.0, 0.0}, 0.0), kmargin);
    r.spatial_static_energy = metrics::laplacian_energy(ks_img, ks_mask);
    save(out, "galvo_static.pgm", gs_img);
    save(out, "kaleidoscope_static.pgm", ks_img);

    // every sensor pixel that sees any part of the static layer in some tile
    LightField footprint;
    footprint.views = kviews;
    for (const auto& v : kviews) {
      const metrics::Mask m = metrics::layer_mask(tiles, stat, v, 0.0, 1e-9);
      Image im(m.width(), m.height());
      for (std::size_t i = 0; i < m.size(); ++i) im.data()[i] = m[i];
      footprint.images.push_back(std::move(im));
    }
    const Image mosaic = spatial_mux(footprint, k.layout);
    for (const Event& e : ks.events)
      if (mosaic.at(e.x, e.y) > 0.0) ++r.spatial_static_events;
  }
  return r;
}

// ---- edge orientation ------------------------------------------------------

EdgeRun run_edges(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("edges");
  const LayeredScene scene = sc.scene();
  const SensorConfig cfg = sc.sensor(seed);
  const FrameRequest req = sc.reconstruction();
  const GalvoSetup g = galvo_setup(sc.section("galvo"));
  const SpatialSetup k = spatial_setup(sc.section("kaleidoscope"), MosaicKind::kaleidoscope,
                                       scene.width, scene.height);
  const int layer = j.value("layer", -1);
  const double duration = j.at("duration");
  const int border = j.value("border", 16);
  const double depth = layer_at(scene, layer).depth;

  EdgeRun r;
  const EventStream gs = pipeline::simulate_galvo(scene, g.curve, 0.0, duration, g.sample_rate, cfg);
  const LightField glf =
      pipeline::galvo_lightfield(gs, g.curve, g.bins, last_period(g.curve, duration), req);
  const Grid<double> gimg = refocused(glf, depth, scene.focus_distance, scene.disparity_constant);
  r.galvo = metrics::sobel_energy(
      gimg, metrics::rect_mask(scene.width, scene.height, border, border, scene.width - border,
                               scene.height - border));

  const EventStream ks = pipeline::simulate_spatial(scene, k.layout, k.pitch, 0.0, duration, k.sample_rate, cfg);
  const LightField klf = pipeline::spatial_lightfield(ks, k.layout, k.pitch, ks.span->end - 1, req);
  const LayeredScene tiles = pipeline::tile_scene(scene, k.layout);
  const Grid<double> kimg = refocused(klf, depth, tiles.focus_distance, tiles.disparity_constant);
  const int kb = std::max(1, border / k.layout.nx);
  r.spatial = metrics::sobel_energy(
      kimg, metrics::rect_mask(tiles.width, tiles.height, kb, kb, tiles.width - kb, tiles.height - kb));

  save(out, "galvo_refocused.pgm", gimg);
  save(out, "kaleidoscope_refocused.pgm", kimg);
  return r;
}

// ---- scan self-calibration -------------------------------------------------

CalibrationRun run_calibration(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("calibration");
  const json& gj = sc.section("galvo");
  const LayeredScene scene = sc.scene(seed);
  const SensorConfig cfg = sc.sensor(seed);
  FrameRequest req = sc.reconstruction();
  const int layer = j.value("layer", -1);
  const double delta = disparity_of(scene, layer);
  if (delta == 0.0) throw DomainError("calibration: the tracked layer sits at the focus distance");

  // the mirror radius is in aperture units; the tracked plane sees it scaled by the disparity
  const double shift_radius = gj.at("radius").get<double>() * std::abs(delta);
  double phase = gj.value("phase", 0.0);
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  }
  // a negative disparity mirrors the circle through its centre
  const ScanCurve curve = ScanCurve::circle(shift_radius / std::abs(delta), gj.at("frequency").get<double>(),
                                            phase + (delta < 0.0 ? std::numbers::pi : 0.0));
  const double rate = gj.at("sample_rate");
  const int bins = gj.value("bins", 40);
  const double T = curve.period;

  CalibrationRun r;
  r.true_radius = shift_radius;
  r.true_phase = phase;
  const EventStream es = pipeline::simulate_galvo(scene, curve, 0.0, T, rate, cfg);
  r.events = es.size();

  const std::int64_t step = j.value("frame_step_us", 100);
  const auto period_us = std::llround(T * 1e6);
  req.timestamps = pipeline::frame_times(step / 2, period_us, step);
  if (sc.true_initial()) req.initial = pipeline::galvo_brightness(scene, curve, 0.0, cfg.log_floor);
  const auto frames = integrate_events(es, req);
  const LightFieldVideo video = bin_to_lightfield(frames, curve, bins);
  const LightField& lf = video.periods.front();
  r.views_per_period = video.views_per_period;

  const auto centers = bin_centers(curve, bins, 0);
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const double a = kTwoPi * curve.frequency_s * centers[b] + curve.phase_s;
    const double s = curve.amplitude_s * std::sin(a), t = curve.amplitude_t * std::cos(a);
    r.known_curve_error = std::max(r.known_curve_error, std::max(std::abs(lf.views[b].s - s), std::abs(lf.views[b].t - t)));
  }

  const ShiftTrack track = best_track(lf.images, patches_from_json(j.at("patch")), j.value("search_radius", 14));
  r.mean_score = track.mean_score();
  std::vector<Point2> pts;
  for (const auto& s : track.shifts) pts.push_back({s.dx, s.dy});
  const CircleFit fit = fit_circle(pts);
  const ViewAssignment va = assign_views(track, fit, curve.frequency_s, centers, j.value("max_residual", 0.5));

  r.result.circle_center = fit.center;
  r.result.radius = fit.radius;
  r.result.rms_residual = fit.rms_residual;
  r.result.phase_offset = va.phase_offset;
  r.result.per_frame_views = va.views;
  r.radius_error = std::abs(fit.radius - shift_radius) / shift_radius;
  r.phase_error_deg = std::remainder(va.phase_offset - phase, kTwoPi) * 180.0 / std::numbers::pi;
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const ViewOffset v = scan_eval(curve, centers[b]);
    r.max_view_error = std::max(r.max_view_error, std::hypot(va.views[b].s - delta * v.s, va.views[b].t - delta * v.t));
  }

  if (out.enabled()) {
    io::write_lightfield(out.dir / "lightfield", lf);
    LightField calibrated = lf;
    calibrated.views = va.views;
    save(out, "refocused_calibrated.pgm", luminance(refocus_shift(calibrated, 1.0)));
  }
  return r;
}

// ---- depth from focus ------------------------------------------------------

DepthRun run_depth(const Scenario& sc, const Output& out) {
  const json& j = sc.section("depth");
  const LayeredScene scene = sc.scene();
  const int nviews = j.value("views", 40);
  const double radius = j.at("radius");
  const auto depths = j.at("slices").get<std::vector<double>>();
  const double min_contrast = j.value("min_contrast", 1e-4);
  const int window = j.value("window", 7);
  const double gain = j.value("gain", 10.0);
  if (depths.size() < 2) throw DomainError("depth: need at least two slices");

  std::vector<ViewOffset> views;
  for (int i = 0; i < nviews; ++i) {
    const double a = kTwoPi * i / nviews;
    views.push_back({radius * std::sin(a), radius * std::cos(a)});
  }
  const LightField lf = render_lightfield(scene, views, 0.0);
  const FocalStack stack = focal_stack(lf, depths, scene.focus_distance, scene.disparity_constant);
  DepthRun r;
  r.map = depth_from_focus(stack, min_contrast, window);

  LightField bright = lf;
  for (auto& im : bright.images)
    for (auto& v : im.data()) v *= gain;
  const DepthMap gained =
      depth_from_focus(focal_stack(bright, depths, scene.focus_distance, scene.disparity_constant),
                       min_contrast * gain * gain, window);
  std::size_t same = 0;
  for (std::size_t i = 0; i < r.map.slice.size(); ++i) same += r.map.slice[i] == gained.slice[i];
  r.gain_agreement = static_cast<double>(same) / static_cast<double>(r.map.slice.size());

  // ground truth: the single layer that owns each pixel in every view
  const int border = std::max(j.value("border", 0), guard_band(scene, views, 0.0));
  Grid<double> truth(scene.width, scene.height, std::numeric_limits<double>::quiet_NaN());
  std::vector<metrics::Mask> owned;
  for (int idx = -1; idx < static_cast<int>(scene.layers.size()); ++idx) {
    metrics::Mask m = metrics::layer_mask(scene, idx, views.front(), 0.0);
    for (const auto& v : views) m = metrics::intersect(m, metrics::layer_mask(scene, idx, v, 0.0));
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) truth[i] = layer_at(scene, idx).depth;
  }
  const double spacing = (depths.back() - depths.front()) / static_cast<double>(depths.size() - 1);
  std::size_t within = 0;
  for (int y = border; y < scene.height - border; ++y)
    for (int x = border; x < scene.width - border; ++x) {
      const double t = truth(x, y);
      if (std::isnan(t)) continue;
      ++r.textured;
      const double d = r.map.depth(x, y);
      if (std::isnan(d)) continue;
      ++r.valid;
      within += std::abs(d - t) <= spacing;
    }
  r.fraction_within = r.valid ? static_cast<double>(within) / static_cast<double>(r.valid) : 0.0;

  if (out.enabled()) {
    io::write_focal_stack(out.dir / "focal_stack", stack);
    io::write_depthmap(out.dir / "depth", r.map, "scene");
  }
  return r;
}

// ---- depth-disparity calibration -------------------------------------------

DepthFitRun run_depth_fit(const Scenario& sc, std::uint64_t seed) {
  const json& j = sc.section("depth_fit");
  DepthFitRun r;
  r.true_slope = j.at("slope");
  r.true_intercept = j.at("intercept");
  const auto depths = j.at("depths").get<std::vector<double>>();
  const double sigma = j.value("noise", 0.0);
  std::mt19937_64 rng(detail::mix_seed(seed, 0xDEF7));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<DisparityDepth> pairs;
  for (double d : depths)
    pairs.push_back({(d - r.true_intercept) / r.true_slope, d + (sigma > 0.0 ? sigma * noise(rng) : 0.0)});
  r.fit = fit_depth_disparity(pairs);
  const auto [lo, hi] = std::minmax_element(depths.begin(), depths.end());
  r.depth_span = *hi - *lo;
  return r;
}

// ---- readout bandwidth -----------------------------------------------------

BandwidthRun run_bandwidth(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("bandwidth");
  const LayeredScene scene = sc.scene();
  const SensorConfig cfg = sc.sensor(seed);
  SensorConfig uncapped = cfg;
  uncapped.bandwidth_cap = std::numeric_limits<double>::infinity();
  const FrameRequest req = sc.reconstruction();
  const double radius = j.at("radius");
  const int periods = j.value("periods", 2);
  const int samples = j.value("samples_per_period", 20);
  const int bins = j.value("bins", 20);
  const int stat = j.at("static_layer"), moving = j.at("moving_layer");
  const double depth = j.value("refocus_depth", layer_at(scene, stat).depth);
  const double threshold = j.value("saturation_threshold", 0.01);
  const int extra = j.value("margin", 6);

  BandwidthRun r;
  r.frequencies = j.at("frequencies").get<std::vector<double>>();
  for (double f : r.frequencies) {
    const ScanCurve curve = ScanCurve::circle(radius, f);
    const double T = curve.period;
    const EventStream raw =
        pipeline::simulate_galvo(scene, curve, 0.0, periods * T, samples * f, uncapped);
    const EventStream es = apply_bandwidth_limit(raw, cfg);
    r.events_in.push_back(raw.size());
    r.dropped.push_back(raw.size() ? 1.0 - static_cast<double>(es.size()) / static_cast<double>(raw.size()) : 0.0);

    const long long p = periods - 1;
    const LightField lf = pipeline::galvo_lightfield(es, curve, bins, p, req);
    // noise-free truth on the same bins, relative to t = 0 like the reconstruction
    LightField truth = lf;
    const Grid<double> b0 = pipeline::galvo_brightness(scene, curve, 0.0, cfg.log_floor);
    const auto centers = bin_centers(curve, bins, p);
    for (std::size_t b = 0; b < centers.size(); ++b) {
      Grid<double> g = pipeline::galvo_brightness(scene, curve, centers[b], cfg.log_floor);
      if (!sc.true_initial())
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= b0[i];
      truth.images[b] = Image(g);
    }
    const Grid<double> rec = refocused(lf, depth, scene.focus_distance, scene.disparity_constant);
    const Grid<double> ref = refocused(truth, depth, scene.focus_distance, scene.disparity_constant);
    const int margin = guard_band(scene, lf.views, extra);
    const double tmid = (static_cast<double>(p) + 0.5) * T;
    const auto smask = metrics::erode(metrics::layer_mask(scene, stat, {0.0, 0.0}, tmid), margin);
    const auto mmask = metrics::erode(metrics::layer_mask(scene, moving, {0.0, 0.0}, tmid), margin);
    r.static_detail.push_back(metrics::projected_detail(rec, ref, smask));
    r.moving_detail.push_back(metrics::projected_detail(rec, ref, mmask));
    if (r.saturating_frequency == 0.0 && r.dropped.back() > threshold) r.saturating_frequency = f;
    save(out, "refocused_" + tag(f) + "hz.pgm", rec);
  }
  return r;
}

// ---- high dynamic range ----------------------------------------------------

HdrRun run_hdr(const Scenario& sc, std::uint64_t seed, const Output& out) {
  const json& j = sc.section("hdr");
  const LayeredScene scene = sc.scene();
  const SensorConfig cfg = sc.sensor(seed);
  const FrameRequest req = sc.reconstruction();
  const GalvoSetup g = galvo_setup(sc.section("galvo"));
  const int bright = j.at("bright_layer"), dark = j.value("dark_layer", -1);
  const double depth = j.value("refocus_depth", layer_at(scene, bright).depth);
  const int window = j.value("window", 7);
  const double threshold = j.at("threshold");
  const int extra = j.value("margin", 8);
  const int periods = j.value("periods", 2);
  const int bits = j.value("bit_depth", 8);

  HdrRun r;
  r.required = j.value("required_fraction", 0.9);
  const auto views = bin_views(g.curve, g.bins);
  const int margin = guard_band(scene, views, extra);
  const auto bmask = metrics::erode(metrics::layer_mask(scene, bright, {0.0, 0.0}, 0.0), margin);
  const auto dmask = metrics::intersect(
      metrics::erode(metrics::layer_mask(scene, dark, {0.0, 0.0}, 0.0), margin),
      metrics::rect_mask(scene.width, scene.height, margin, margin, scene.width - margin, scene.height - margin));

  const EventStream es =
      pipeline::simulate_galvo(scene, g.curve, 0.0, periods * g.curve.period, g.sample_rate, cfg);
  const LightField lf = pipeline::galvo_lightfield(es, g.curve, g.bins, periods - 1, req);
  const Grid<double> rec = refocused(lf, depth, scene.focus_distance, scene.disparity_constant);
  r.event_bright = metrics::contrast_fraction(rec, bmask, window, threshold);
  r.event_dark = metrics::contrast_fraction(rec, dmask, window, threshold);
  save(out, "event_refocused.pgm", rec);

  // conventional frame camera: clipped, quantised, then compared in log space
  const double top = std::ldexp(1.0, bits) - 1.0;
  const Grid<double> radiance = luminance(render_view(scene, {0.0, 0.0}, 0.0));
  const json& ex = j.at("exposure");
  const double base = ex.at("base");
  const int stops = ex.at("stops");
  for (int k = 0; k <= stops; ++k) {
    const double e = base * std::ldexp(1.0, k);
    Grid<double> code(radiance.width(), radiance.height());
    Grid<double> logc(radiance.width(), radiance.height());
    for (std::size_t i = 0; i < code.size(); ++i) {
      code[i] = std::clamp(std::round(e * radiance[i]), 0.0, top);
      logc[i] = std::log(std::max(code[i], 1.0));
    }
    r.exposures.push_back(e);
    r.frame_bright.push_back(metrics::contrast_fraction(logc, bmask, window, threshold));
    r.frame_dark.push_back(metrics::contrast_fraction(logc, dmask, window, threshold));
    save(out, "frame_exposure_" + std::to_string(k) + ".pgm", code);
  }
  return r;
}

}  // namespace evf::scenarios
