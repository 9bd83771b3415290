// evfield: command-line front end. Every subcommand writes its outputs,
// manifest.json and (when it measures something) metrics.csv into --out.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evfield/io.hpp"
#include "evfield/parallel.hpp"
#include "evfield/pipeline.hpp"
#include "evfield/scenarios.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace evf;
namespace sc = evf::scenarios;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string threads;
};

// Collects what a run produced for the manifest and the metrics table.
struct Run {
  std::string subcommand;
  json config = json::object();
  std::vector<std::string> outputs;
  std::vector<io::Metric> metrics;

  fs::path dir;
  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return dir / name;
  }
  void metric(const std::string& name, double value, const std::string& tol = "", bool pass = true) {
    metrics.push_back({name, value, tol, pass});
  }
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "Scenario or scene JSON");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Thread count or 'auto' (default: $EVF_THREADS)");
}

void apply_threads(const Common& c) {
  std::string t = c.threads;
  if (t.empty())
    if (const char* env = std::getenv("EVF_THREADS")) t = env;
  if (t.empty() || t == "auto") {
    set_num_threads(0);
    return;
  }
  int n = 0;
  try {
    std::size_t used = 0;
    n = std::stoi(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
  } catch (const std::exception&) {
    throw DomainError("--threads must be a positive integer or 'auto', got '" + t + "'");
  }
  if (n < 1) throw DomainError("--threads must be >= 1");
  set_num_threads(n);
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (v.empty()) throw DomainError(std::string(what) + ": empty list");
  return v;
}

std::string hz(double f) {
  char b[32];
  std::snprintf(b, sizeof b, "%g", f);
  return b;
}

Estimate parse_estimate(const std::string& s) {
  if (s == "reference") return Estimate::reference;
  if (s == "midpoint") return Estimate::midpoint;
  if (s == "interpolated") return Estimate::interpolated;
  throw DomainError("--estimate must be reference, midpoint or interpolated");
}

// ---- scenario subcommands --------------------------------------------------

void cmd_fidelity(const Common& c, Run& run) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  const auto r = sc::run_fidelity(s, c.seed, {run.dir});
  for (auto n : {"final_truth.pgm", "final_reconstruction.pgm", "abs_error.pgm"}) run.outputs.push_back(n);
  run.metric("max_abs_error", r.max_error, "< " + hz(r.threshold), r.max_error < r.threshold);
  run.metric("events", static_cast<double>(r.events));
}

void cmd_compare(const Common& c, Run& run, bool edges) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  if (edges || (s.has("edges") && !s.has("compare"))) {
    const auto r = sc::run_edges(s, c.seed, {run.dir});
    run.outputs = {"galvo_refocused.pgm", "kaleidoscope_refocused.pgm"};
    run.metric("kaleidoscope_edge_ratio", r.spatial.ratio(), "< 0.1", r.spatial.ratio() < 0.1);
    run.metric("galvo_edge_ratio", r.galvo.ratio(), "> 0.5", r.galvo.ratio() > 0.5);
    return;
  }
  const auto r = sc::run_compare(s, c.seed, {run.dir});
  bool decreasing = true;
  for (std::size_t i = 0; i < r.speeds.size(); ++i) {
    const std::string k = hz(r.speeds[i]) + "x";
    run.outputs.push_back("galvo_object_" + k + ".pgm");
    run.outputs.push_back("kaleidoscope_object_" + k + ".pgm");
    const bool dec = i == 0 || r.galvo_sharpness[i] < r.galvo_sharpness[i - 1];
    decreasing = decreasing && dec;
    run.metric("galvo_sharpness_" + k, r.galvo_sharpness[i], i ? "< previous speed" : "", dec);
    run.metric("kaleidoscope_sharpness_" + k, r.spatial_sharpness[i]);
    run.metric("galvo_events_" + k, static_cast<double>(r.galvo_events[i]));
    run.metric("kaleidoscope_events_" + k, static_cast<double>(r.spatial_events[i]));
  }
  run.outputs.push_back("galvo_static.pgm");
  run.outputs.push_back("kaleidoscope_static.pgm");
  const auto [lo, hi] = std::minmax_element(r.spatial_sharpness.begin(), r.spatial_sharpness.end());
  const double var = (*hi - *lo) / *hi;
  run.metric("kaleidoscope_sharpness_variation", var, "< 0.1", var < 0.1);
  run.metric("galvo_sharpness_decreasing", decreasing ? 1 : 0, "== 1", decreasing);
  run.metric("kaleidoscope_static_events", static_cast<double>(r.spatial_static_events), "== 0",
             r.spatial_static_events == 0);
  run.metric("galvo_static_energy", r.galvo_static_energy);
  const double ratio = r.galvo_static_energy > 0.0 ? r.spatial_static_energy / r.galvo_static_energy : 1.0;
  run.metric("static_energy_ratio", ratio, "< 0.05", ratio < 0.05);
}

void cmd_hdr(const Common& c, Run& run) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  const auto r = sc::run_hdr(s, c.seed, {run.dir});
  const std::string tol = ">= " + hz(r.required);
  run.outputs.push_back("event_refocused.pgm");
  run.metric("event_bright_fraction", r.event_bright, tol, r.event_bright >= r.required);
  run.metric("event_dark_fraction", r.event_dark, tol, r.event_dark >= r.required);
  for (std::size_t k = 0; k < r.exposures.size(); ++k) {
    const bool fails = r.frame_bright[k] < r.required || r.frame_dark[k] < r.required;
    run.outputs.push_back("frame_exposure_" + std::to_string(k) + ".pgm");
    run.metric("frame_bright_fraction_stop" + std::to_string(k), r.frame_bright[k]);
    run.metric("frame_dark_fraction_stop" + std::to_string(k), r.frame_dark[k], "one region < " + hz(r.required),
               fails);
  }
}

void cmd_bandwidth(const Common& c, Run& run) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  const auto r = sc::run_bandwidth(s, c.seed, {run.dir});
  bool monotone = true;
  for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
    const std::string k = hz(r.frequencies[i]) + "hz";
    const bool mono = i == 0 || r.dropped[i] >= r.dropped[i - 1];
    monotone = monotone && mono;
    const bool saturated = r.saturating_frequency > 0.0 && r.frequencies[i] >= r.saturating_frequency;
    run.outputs.push_back("refocused_" + k + ".pgm");
    run.metric("dropped_fraction_" + k, r.dropped[i], i ? ">= previous" : "", mono);
    run.metric("events_in_" + k, static_cast<double>(r.events_in[i]));
    run.metric("static_detail_" + k, r.static_detail[i], saturated ? "< 50hz value" : "",
               !saturated || r.static_detail[i] < r.static_detail[0]);
    run.metric("rotating_detail_" + k, r.moving_detail[i], saturated ? "> 50hz value" : "",
               !saturated || r.moving_detail[i] > r.moving_detail[0]);
  }
  run.metric("saturating_frequency", r.saturating_frequency, "> 0", r.saturating_frequency > 0.0);
}

void cmd_depthfit(const Common& c, const std::string& pairs_csv, Run& run) {
  DepthFit fit;
  if (!pairs_csv.empty()) {
    std::vector<DisparityDepth> pairs;
    std::ifstream in(pairs_csv);
    if (!in) throw DomainError("cannot open " + pairs_csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      const auto v = parse_list(line, "pairs");
      if (v.size() != 2) throw ParseError("pairs: line " + std::to_string(n) + " needs disparity,depth", n);
      pairs.push_back({v[0], v[1]});
    }
    fit = fit_depth_disparity(pairs);
    run.config = {{"pairs", pairs_csv}};
  } else {
    if (c.config.empty()) throw DomainError("depthfit: give --config or --pairs");
    const auto s = sc::Scenario::load(c.config);
    run.config = s.doc;
    const auto r = sc::run_depth_fit(s, c.seed);
    fit = r.fit;
    const double rel = fit.residual_rms / r.depth_span;
    run.metric("slope_error", std::abs(fit.slope - r.true_slope));
    run.metric("intercept_error", std::abs(fit.intercept - r.true_intercept));
    run.metric("residual_over_span", rel, "< 0.01", rel < 0.01);
  }
  run.metric("slope", fit.slope);
  run.metric("intercept", fit.intercept);
  run.metric("residual_rms", fit.residual_rms);
  CalibrationResult cr;
  cr.depth_fit = fit;
  io::write_json(run.file("depth_fit.json"), io::to_json(cr)["depth_fit"]);
}

void cmd_calibrate(const Common& c, const std::string& events, const std::string& initial,
                   const std::vector<PatchRect>& patches, int bins, int search, std::int64_t step, Run& run) {
  if (events.empty()) {
    const auto s = sc::Scenario::load(c.config);
    run.config = s.doc;
    const auto r = sc::run_calibration(s, c.seed, {run.dir});
    run.outputs.push_back("lightfield/index.json");
    run.outputs.push_back("refocused_calibrated.pgm");
    io::write_json(run.file("calibration.json"), io::to_json(r.result));
    run.metric("radius", r.result.radius);
    run.metric("radius_error", r.radius_error, "< 0.05", r.radius_error < 0.05);
    run.metric("phase_error_deg", r.phase_error_deg, "|x| < 5", std::abs(r.phase_error_deg) < 5.0);
    run.metric("max_view_error", r.max_view_error, "<= 0.05", r.max_view_error <= 0.05);
    run.metric("known_curve_error", r.known_curve_error, "<= 1e-9", r.known_curve_error <= 1e-9);
    run.metric("views_per_period", r.views_per_period);
    run.metric("rms_residual", r.result.rms_residual);
    run.metric("mean_ncc", r.mean_score);
    return;
  }
  // from a recorded stream: only the scan frequency is taken from its metadata
  const EventStream es = io::read_events(events);
  if (!es.scan) throw DomainError("calibrate: event file has no scan metadata");
  run.config = {{"events", events}, {"bins", bins}, {"search_radius", search}, {"frame_step_us", step}};
  const ScanCurve& curve = *es.scan;
  FrameRequest req;
  req.decay = 0.0;
  req.estimate = Estimate::interpolated;
  const std::int64_t begin = es.span ? es.span->begin : 0;
  const std::int64_t end = es.span ? es.span->end - 1 : (es.events.empty() ? 0 : es.events.back().t);
  req.initial_time = begin;
  // without the first image the frames are differences from it, which track poorly
  if (!initial.empty()) {
    const fs::path p = initial;
    const Image img = fs::exists(fs::path(initial + ".json")) ? io::read_normalized(p) : io::read_image(p);
    req.initial = brightness(img);
    run.config["initial"] = initial;
  }
  req.timestamps = pipeline::frame_times(begin + step / 2, end, step);
  const auto frames = integrate_events(es, req);
  const auto video = bin_to_lightfield(frames, curve, bins);
  const LightField& lf = video.periods.front();
  const auto track = sc::best_track(lf.images, patches, search);
  std::vector<Point2> pts;
  for (const auto& s : track.shifts) pts.push_back({s.dx, s.dy});
  const CircleFit fit = fit_circle(pts);
  const auto times = bin_centers(curve, bins, static_cast<long long>(std::llround(*lf.timestamp / curve.period)));
  const ViewAssignment va = assign_views(track, fit, curve.frequency_s, times);
  CalibrationResult cr{fit.center, fit.radius, va.phase_offset, fit.rms_residual, va.views, std::nullopt};
  io::write_json(run.file("calibration.json"), io::to_json(cr));
  run.metric("radius", fit.radius);
  run.metric("phase_offset", va.phase_offset);
  run.metric("rms_residual", fit.rms_residual);
  run.metric("mean_ncc", track.mean_score());
}

// ---- pipeline subcommands --------------------------------------------------

void cmd_simulate(const Common& c, const std::string& design, double duration, const std::string& format,
                  Run& run) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  const LayeredScene scene = s.scene();
  const SensorConfig cfg = s.sensor(c.seed);
  EventStream es;
  if (design == "galvo") {
    const auto g = sc::galvo_setup(s.has("galvo") ? s.section("galvo")
                                                  : json{{"radius", 3.0}, {"frequency", 250.0}});
    if (!(duration > 0.0)) duration = g.curve.period;
    es = pipeline::simulate_galvo(scene, g.curve, 0.0, duration, g.sample_rate, cfg);
  } else if (design == "kaleidoscope" || design == "mla") {
    const bool k = design == "kaleidoscope";
    const char* key = k ? "kaleidoscope" : "microlens";
    const json block = s.has(key) ? s.section(key) : json{{"views", 4}, {"pitch", 1.0}, {"sample_rate", 5000.0}};
    const auto m = sc::spatial_setup(block, k ? MosaicKind::kaleidoscope : MosaicKind::microlens, scene.width,
                                     scene.height);
    if (!(duration > 0.0)) duration = 0.004;
    es = pipeline::simulate_spatial(scene, m.layout, m.pitch, 0.0, duration, m.sample_rate, cfg);
  } else {
    throw DomainError("--design must be galvo, kaleidoscope or mla");
  }
  const bool text = format == "text";
  const std::string name = text ? "events.evt" : "events.evf2";
  io::write_events(run.file(name), es, text ? io::EventFormat::text : io::EventFormat::binary);
  run.outputs.push_back(name + ".meta.json");
  run.metric("events", static_cast<double>(es.size()));
  run.metric("event_rate", static_cast<double>(es.size()) / duration);
  run.config["design"] = design;
  run.config["duration"] = duration;
}

void cmd_render(const Common& c, const std::vector<double>& view, double time, int circle, double radius,
                Run& run) {
  const auto s = sc::Scenario::load(c.config);
  run.config = s.doc;
  const LayeredScene scene = s.scene();
  if (circle > 0) {
    std::vector<ViewOffset> views;
    for (int i = 0; i < circle; ++i) {
      const double a = 2.0 * std::numbers::pi * i / circle;
      views.push_back({radius * std::sin(a), radius * std::cos(a)});
    }
    io::write_lightfield(run.file("lightfield"), render_lightfield(scene, views, time));
    return;
  }
  if (view.size() != 2) throw DomainError("--view needs s,t");
  io::write_normalized(run.file("view.pgm"), render_view(scene, {view[0], view[1]}, time));
}

void cmd_integrate(const std::string& events, int bins, long long period, const std::string& times,
                   double decay, const std::string& estimate, Run& run) {
  const EventStream es = io::read_events(events);
  FrameRequest req;
  req.decay = decay;
  req.estimate = parse_estimate(estimate);
  run.config = {{"events", events}, {"decay", decay}, {"estimate", estimate}};
  if (bins > 0) {
    if (!es.scan) throw DomainError("integrate: --bins needs scan metadata in the event file");
    const LightField lf = pipeline::galvo_lightfield(es, *es.scan, bins, period, req);
    io::write_lightfield(run.file("lightfield"), lf);
    run.config["bins"] = bins;
    run.config["period"] = period;
    return;
  }
  if (es.layout && times.empty()) {
    const std::int64_t t = es.span ? es.span->end - 1 : es.events.back().t;
    const LightField lf = pipeline::spatial_lightfield(
        es, *es.layout, 1.0, t, req);
    io::write_lightfield(run.file("lightfield"), lf);
    return;
  }
  const auto v = parse_list(times, "--times");
  if (v.size() != 3) throw DomainError("--times needs t0,t1,step in microseconds");
  req.timestamps = pipeline::frame_times(std::llround(v[0]), std::llround(v[1]), std::llround(v[2]));
  const auto frames = integrate_events(es, req);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.pgm", i);
    io::write_normalized(run.file(name), Image(frames[i].grid));
  }
  run.metric("frames", static_cast<double>(frames.size()));
}

// Shift from --shift, or from --depth with d0/A from flags or a scene config.
double resolve_shift(const Common& c, std::optional<double> shift, std::optional<double> depth, double d0,
                     double A) {
  if (shift) return *shift;
  if (!depth) throw DomainError("give --shift or --depth");
  if (!c.config.empty()) {
    const LayeredScene s = sc::Scenario::load(c.config).scene();
    d0 = s.focus_distance;
    A = s.disparity_constant;
  }
  return layer_disparity(*depth, d0, A);
}

// Refocus shift measured on the data: the patch of the view nearest the
// aperture centre is matched in every other view and the displacements are
// fitted as shift * (view offset difference), least squares.
std::pair<double, double> measured_shift(const LightField& lf, const PatchRect& patch, int search) {
  lf.validate();
  std::size_t ref = 0;
  for (std::size_t v = 1; v < lf.size(); ++v)
    if (std::hypot(lf.views[v].s, lf.views[v].t) < std::hypot(lf.views[ref].s, lf.views[ref].t)) ref = v;
  const Image tpl = crop(lf.images[ref], patch);
  double num = 0.0, den = 0.0, score = 0.0;
  for (std::size_t v = 0; v < lf.size(); ++v) {
    if (v == ref) continue;
    const TemplateMatch m = match_template(tpl, patch.x, patch.y, lf.images[v], search);
    const double ds = lf.views[v].s - lf.views[ref].s, dt = lf.views[v].t - lf.views[ref].t;
    num += m.dx * ds + m.dy * dt;
    den += ds * ds + dt * dt;
    score += m.score;
  }
  if (!(den > 0.0)) throw DegenerateInput("refocus: views do not span the aperture");
  return {num / den, score / static_cast<double>(lf.size() - 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-field simulation and light-field processing"};
  app.require_subcommand(1);
  Common common;
  Run run;
  std::function<void()> action;

  auto scenario = [&](const char* name, const char* help, std::function<void(const Common&, Run&)> f) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common, true);
    cmd->callback([&, f] { action = [&, f] { f(common, run); }; });
  };
  scenario("fidelity", "Event-model round trip on a ramp scene", cmd_fidelity);
  scenario("compare", "Galvanometer vs kaleidoscope at several object speeds",
           [](const Common& c, Run& r) { cmd_compare(c, r, false); });
  scenario("edges", "Oriented edge energy of both designs on a translating grid",
           [](const Common& c, Run& r) { cmd_compare(c, r, true); });
  scenario("hdr", "Event reconstruction vs an 8-bit frame camera on a high-contrast scene", cmd_hdr);
  scenario("bandwidth", "Scan-frequency sweep under a readout cap", cmd_bandwidth);

  std::string design = "galvo", format = "binary";
  double duration = 0.0;
  auto* sim = app.add_subcommand("simulate", "Scene -> optics -> events");
  add_common(sim, common, true);
  sim->add_option("--design", design, "galvo, kaleidoscope or mla")->check(CLI::IsMember({"galvo", "kaleidoscope", "mla"}));
  sim->add_option("--duration", duration, "Seconds (default: one scan period, or 4 ms)");
  sim->add_option("--format", format, "binary or text")->check(CLI::IsMember({"binary", "text"}));
  sim->callback([&] { action = [&] { cmd_simulate(common, design, duration, format, run); }; });

  std::string view_s = "0,0";
  double time = 0.0, radius = 3.0;
  int circle = 0;
  auto* render = app.add_subcommand("render", "Render one view or a circular light field");
  add_common(render, common, true);
  render->add_option("--view", view_s, "Aperture offset s,t");
  render->add_option("--time", time, "Seconds");
  render->add_option("--circle", circle, "Render this many views on a circle instead");
  render->add_option("--radius", radius, "Circle radius in aperture units");
  render->callback([&] { action = [&] { cmd_render(common, parse_list(view_s, "--view"), time, circle, radius, run); }; });

  std::string events, times, estimate = "reference";
  int bins = 0;
  long long period = 0;
  double decay = 1.0;
  auto* integ = app.add_subcommand("integrate", "Events -> frames or light field");
  add_common(integ, common, false);
  integ->add_option("--events", events, "Event file")->required();
  integ->add_option("--bins", bins, "Phase bins per scan period (galvanometer streams)");
  integ->add_option("--period", period, "Scan period index");
  integ->add_option("--times", times, "t0,t1,step in microseconds");
  integ->add_option("--decay", decay, "Leak rate 1/s");
  integ->add_option("--estimate", estimate, "reference, midpoint or interpolated");
  integ->callback([&] { action = [&] { cmd_integrate(events, bins, period, times, decay, estimate, run); }; });

  std::string lf_dir, depths_s;
  std::optional<double> shift, depth;
  double d0 = 1.0, A = 1.0;
  auto* refoc = app.add_subcommand("refocus", "Shift-and-add refocus of a light field");
  add_common(refoc, common, false);
  refoc->add_option("--lightfield", lf_dir, "Light-field directory")->required();
  refoc->add_option("--shift", shift, "Pixels per aperture unit");
  refoc->add_option("--depth", depth, "Focus depth (uses d0 and A)");
  refoc->add_option("--d0", d0, "Focus distance of the capture");
  refoc->add_option("-A,--disparity-constant", A, "Disparity constant");
  std::string refocus_patch;
  int refocus_search = 8;
  refoc->add_option("--patch", refocus_patch, "x,y,w,h: measure the shift that brings this patch into focus");
  refoc->add_option("--search", refocus_search, "Search radius for --patch");
  refoc->callback([&] {
    action = [&] {
      const LightField lf = io::read_lightfield(lf_dir);
      double s = 0.0;
      if (!refocus_patch.empty()) {
        const auto v = parse_list(refocus_patch, "--patch");
        if (v.size() != 4) throw DomainError("--patch needs x,y,w,h");
        const PatchRect rect{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])};
        const auto [measured, score] = measured_shift(lf, rect, refocus_search);
        s = measured;
        run.metric("shift", s);
        run.metric("mean_ncc", score);
      } else {
        s = resolve_shift(common, shift, depth, d0, A);
      }
      run.config = {{"lightfield", lf_dir}, {"shift", s}};
      io::write_normalized(run.file("refocused.pgm"), refocus_shift(lf, s));
    };
  });

  auto* stack = app.add_subcommand("focalstack", "Refocus at a list of depths");
  add_common(stack, common, false);
  stack->add_option("--lightfield", lf_dir, "Light-field directory")->required();
  stack->add_option("--depths", depths_s, "Comma-separated depths")->required();
  stack->add_option("--d0", d0, "Focus distance");
  stack->add_option("-A,--disparity-constant", A, "Disparity constant");
  stack->callback([&] {
    action = [&] {
      if (!common.config.empty()) {
        const LayeredScene s = sc::Scenario::load(common.config).scene();
        d0 = s.focus_distance;
        A = s.disparity_constant;
      }
      const auto ds = parse_list(depths_s, "--depths");
      run.config = {{"lightfield", lf_dir}, {"depths", ds}, {"d0", d0}, {"A", A}};
      io::write_focal_stack(run.file("focal_stack"), focal_stack(io::read_lightfield(lf_dir), ds, d0, A));
    };
  });

  double min_contrast = 1e-4;
  int window = 7;
  auto* dep = app.add_subcommand("depth", "Depth from focus (scenario, or a light field plus depths)");
  add_common(dep, common, false);
  dep->add_option("--lightfield", lf_dir, "Light-field directory");
  dep->add_option("--depths", depths_s, "Comma-separated depths");
  dep->add_option("--d0", d0, "Focus distance");
  dep->add_option("-A,--disparity-constant", A, "Disparity constant");
  dep->add_option("--min-contrast", min_contrast, "Focus-measure gate");
  dep->add_option("--window", window, "Focus-measure window");
  dep->callback([&] {
    action = [&] {
      if (lf_dir.empty()) {
        if (common.config.empty()) throw DomainError("depth: give --config or --lightfield");
        const auto s = sc::Scenario::load(common.config);
        run.config = s.doc;
        const auto r = sc::run_depth(s, {run.dir});
        run.outputs = {"focal_stack/index.json", "depth.evd", "depth.ppm"};
        run.metric("fraction_within_one_slice", r.fraction_within, ">= 0.95", r.fraction_within >= 0.95);
        run.metric("valid_pixels", static_cast<double>(r.valid));
        run.metric("textured_pixels", static_cast<double>(r.textured));
        run.metric("gain_argmax_agreement", r.gain_agreement, "== 1", r.gain_agreement == 1.0);
        return;
      }
      const auto ds = parse_list(depths_s, "--depths");
      run.config = {{"lightfield", lf_dir}, {"depths", ds}, {"d0", d0}, {"A", A}, {"min_contrast", min_contrast}};
      const DepthMap m = depth_from_focus(focal_stack(io::read_lightfield(lf_dir), ds, d0, A), min_contrast, window);
      io::write_depthmap(run.dir / "depth", m, "scene");
      run.outputs = {"depth.evd", "depth.ppm"};
    };
  });

  std::string mosaic_path, kind = "kaleidoscope";
  int nviews = 4;
  auto* mux = app.add_subcommand("mux", "Light field <-> sensor mosaic");
  add_common(mux, common, false);
  mux->add_option("--lightfield", lf_dir, "Light field to multiplex");
  mux->add_option("--demux", mosaic_path, "Mosaic image to split instead");
  mux->add_option("--kind", kind, "kaleidoscope or mla")->check(CLI::IsMember({"kaleidoscope", "mla"}));
  mux->add_option("--views", nviews, "Views per axis");
  mux->callback([&] {
    action = [&] {
      auto layout = [&](int w, int h) {
        return kind == "kaleidoscope" ? MosaicLayout::kaleidoscope(nviews, nviews, w, h)
                                      : MosaicLayout::microlens(nviews, nviews, w, h);
      };
      run.config = {{"kind", kind}, {"views", nviews}};
      if (!mosaic_path.empty()) {
        const Image m = io::read_normalized(mosaic_path);
        io::write_lightfield(run.file("lightfield"), spatial_demux(m, layout(m.width(), m.height())));
        return;
      }
      if (lf_dir.empty()) throw DomainError("mux: give --lightfield or --demux");
      const LightField lf = io::read_lightfield(lf_dir);
      io::write_normalized(run.file("mosaic.pgm"),
                           spatial_mux(lf, layout(lf.width() * nviews, lf.height() * nviews)));
    };
  });

  std::vector<std::string> patch_s = {"64,64,128,128"};
  std::string initial_image;
  int search = 14, cal_bins = 40;
  std::int64_t step = 100;
  auto* cal = app.add_subcommand("calibrate", "Recover the scan circle from events");
  add_common(cal, common, false);
  cal->add_option("--events", events, "Recorded galvanometer stream (instead of a scenario)");
  cal->add_option("--initial", initial_image, "Radiance image at the stream start (recommended with --events)");
  cal->add_option("--patch", patch_s, "Template x,y,w,h; repeat to try several, the best mean NCC wins")->take_all();
  cal->add_option("--bins", cal_bins, "Views per scan period");
  cal->add_option("--search", search, "Search radius in pixels");
  cal->add_option("--frame-step", step, "Frame spacing in microseconds");
  cal->callback([&] {
    action = [&] {
      if (events.empty() && common.config.empty()) throw DomainError("calibrate: give --config or --events");
      std::vector<PatchRect> patches;
      for (const auto& p : patch_s) {
        const auto v = parse_list(p, "--patch");
        if (v.size() != 4) throw DomainError("--patch needs x,y,w,h");
        patches.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])});
      }
      cmd_calibrate(common, events, initial_image, patches, cal_bins, search, step, run);
    };
  });

  std::string pairs;
  auto* dfit = app.add_subcommand("depthfit", "Linear depth-disparity calibration");
  add_common(dfit, common, false);
  dfit->add_option("--pairs", pairs, "CSV of disparity,depth");
  dfit->callback([&] { action = [&] { cmd_depthfit(common, pairs, run); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_threads(common);
    run.subcommand = app.get_subcommands().front()->get_name();
    run.dir = common.out;
    fs::create_directories(run.dir);
    const auto t0 = std::chrono::steady_clock::now();
    action();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json metrics = json::object();
    for (const auto& m : run.metrics) metrics[m.name] = m.value;
    if (!run.metrics.empty()) {
      io::write_metrics_csv(run.dir / "metrics.csv", run.metrics);
      run.outputs.push_back("metrics.csv");
    }
    io::write_json(run.dir / "manifest.json", {{"subcommand", run.subcommand},
                                               {"config", run.config},
                                               {"config_path", common.config},
                                               {"seed", common.seed},
                                               {"threads", num_threads()},
                                               {"outputs", run.outputs},
                                               {"wall_time_s", wall},
                                               {"metrics", metrics}});
    bool ok = true;
    for (const auto& m : run.metrics) {
      std::printf("%-36s %-14.6g %-22s %s\n", m.name.c_str(), m.value, m.tolerance.c_str(), m.pass ? "pass" : "FAIL");
      ok = ok && m.pass;
    }
    if (!ok) std::fprintf(stderr, "evfield: some checks failed (see %s)\n", (run.dir / "metrics.csv").c_str());
    return 0;
  } catch (const DegenerateInput& e) {
    std::fprintf(stderr, "evfield: degenerate input: %s\n", e.what());
    return 3;
  } catch (const CalibrationFailure& e) {
    std::fprintf(stderr, "evfield: calibration failed: %s\n", e.what());
    return 3;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "evfield: parse error: %s\n", e.what());
    return 2;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "evfield: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evfield: %s\n", e.what());
    return 1;
  }
}
