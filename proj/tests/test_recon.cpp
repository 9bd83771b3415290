#include <cmath>
#include <random>

#include "doctest.h"
#include "evfield/parallel.hpp"
#include "evfield/pipeline.hpp"
#include "evfield/recon.hpp"
#include "evfield/reference.hpp"
#include "support.hpp"

using namespace evf;

namespace {

EventStream pixel_stream(std::vector<Event> ev, int w = 2, int h = 2) {
  EventStream s;
  s.width = w;
  s.height = h;
  s.threshold = 0.1f;
  s.events = std::move(ev);
  return s;
}

FrameRequest at(std::vector<std::int64_t> ts, double decay = 0.0) {
  FrameRequest r;
  r.timestamps = std::move(ts);
  r.decay = decay;
  r.c_pos = 0.1;
  r.c_neg = 0.1;
  return r;
}

std::vector<TimedGrid> ramp_frames(const LayeredScene& sc, double t1, double rate) {
  std::vector<TimedGrid> frames;
  for (const auto& f : temporal_mux(sc, ScanCurve::circle(3.0, 250.0), 0.0, t1, rate))
    frames.push_back({f.t, brightness(f.image)});
  return frames;
}

}  // namespace

TEST_CASE("empty stream reproduces the initial state") {
  const EventStream s = pixel_stream({});
  CHECK(integrate_events(s, at({0, 100}))[1].grid == Grid<double>(2, 2, 0.0));
  FrameRequest r = at({50});
  r.initial = Grid<double>(2, 2, 0.4);
  CHECK(integrate_events(s, r)[0].grid == Grid<double>(2, 2, 0.4));
}

TEST_CASE("three positive events sum to 3C") {
  const EventStream s = pixel_stream({{10, 1, 0, 1}, {20, 1, 0, 1}, {30, 1, 0, 1}});
  const auto f = integrate_events(s, at({15, 30, 40}));
  CHECK(f[0].grid(1, 0) == doctest::Approx(0.1));
  CHECK(f[1].grid(1, 0) == doctest::Approx(0.3));
  CHECK(f[2].grid(1, 0) == doctest::Approx(0.3));
  CHECK(f[2].grid(0, 0) == 0.0);
}

TEST_CASE("decay") {
  const EventStream s = pixel_stream({{0, 0, 0, 1}});
  const auto f = integrate_events(s, at({0, 1'000'000}, 1.0));
  CHECK(f[0].grid(0, 0) == doctest::Approx(0.1));
  CHECK(f[1].grid(0, 0) == doctest::Approx(0.1 * std::exp(-1.0)));
  FrameRequest r = at({500'000}, 2.0);
  r.initial = Grid<double>(2, 2, 1.0);
  CHECK(integrate_events(pixel_stream({}), r)[0].grid(1, 1) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("integration is linear over stream concatenation") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> px(0, 7), pol(0, 1);
  std::vector<Event> a, b;
  for (int i = 0; i < 300; ++i) {
    Event e{i, static_cast<std::uint16_t>(px(rng)), static_cast<std::uint16_t>(px(rng)),
            static_cast<std::int8_t>(pol(rng) ? 1 : -1)};
    (i % 2 ? a : b).push_back(e);
  }
  std::vector<Event> both;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both), event_before);
  const auto fa = integrate_events(pixel_stream(a, 8, 8), at({299}, 3.0));
  const auto fb = integrate_events(pixel_stream(b, 8, 8), at({299}, 3.0));
  const auto fab = integrate_events(pixel_stream(both, 8, 8), at({299}, 3.0));
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(fab[0].grid[i] == doctest::Approx(fa[0].grid[i] + fb[0].grid[i]).epsilon(1e-12));
}

TEST_CASE("round trip through the sensor stays within one threshold") {
  LayeredScene sc = test::two_layer_scene(48, 48, 6.0, 2.0);
  sc.layers[0].velocity = {500.0, 200.0};
  const auto frames = ramp_frames(sc, 0.008, 10000.0);
  const EventStream s = generate_events(frames, SensorConfig{});
  FrameRequest r = at({}, 0.0);
  r.initial = frames.front().grid;
  for (const auto& f : frames) r.timestamps.push_back(std::llround(f.t * 1e6));
  const auto rec = integrate_events(s, r);
  double worst = 0.0;
  for (std::size_t k = 0; k < frames.size(); ++k)
    for (std::size_t i = 0; i < frames[k].grid.size(); ++i)
      worst = std::max(worst, std::abs(rec[k].grid[i] - frames[k].grid[i]));
  CHECK(worst < 0.1 + 1e-9);
}

TEST_CASE("reference estimate equals the generator's reference level") {
  LayeredScene sc = test::two_layer_scene(32, 32, 6.0, 2.0);
  const auto frames = ramp_frames(sc, 0.004, 5000.0);
  EventGenerator gen(32, 32, SensorConfig{});
  for (const auto& f : frames) gen.push(f.t, f.grid);
  const std::vector<double> levels = gen.reference();
  const EventStream s = gen.finish();
  FrameRequest r = at({4000});
  r.initial = frames.front().grid;
  const auto rec = integrate_events(s, r);
  for (std::size_t i = 0; i < levels.size(); ++i) CHECK(rec[0].grid[i] == doctest::Approx(levels[i]).epsilon(1e-12));
}

TEST_CASE("crossing_offset") {
  const Event up{100, 0, 0, 1}, down{100, 0, 0, -1};
  SUBCASE("same direction is linear") {
    CHECK(detail::crossing_offset(1, up, 0, 0, 0.1, 0.1) == doctest::Approx(0.0));
    CHECK(detail::crossing_offset(1, up, 0, 50, 0.1, 0.1) == doctest::Approx(0.05));
    CHECK(detail::crossing_offset(0, down, 0, 100, 0.1, 0.2) == doctest::Approx(-0.2));
  }
  SUBCASE("reversal peaks half a step past the last level") {
    const double h = 0.05, fall = 0.15;
    const double q = std::sqrt(h) / (std::sqrt(h) + std::sqrt(fall));
    CHECK(detail::crossing_offset(1, down, 0, 0, 0.1, 0.1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(detail::crossing_offset(1, down, 0, 100, 0.1, 0.1) == doctest::Approx(-0.1));
    // peak of height h at u = q
    const Event far{1'000'000, 0, 0, -1};
    const auto t = static_cast<std::int64_t>(std::llround(q * 1e6));
    CHECK(detail::crossing_offset(1, far, 0, t, 0.1, 0.1) == doctest::Approx(h).epsilon(1e-6));
    CHECK(detail::crossing_offset(1, far, 0, t - 1000, 0.1, 0.1) < h);
    CHECK(detail::crossing_offset(1, far, 0, t + 1000, 0.1, 0.1) < h);
  }
}

TEST_CASE("interpolated frames beat the reference level") {
  LayeredScene sc = test::two_layer_scene(48, 48, 6.0, 2.0);
  sc.layers[0].velocity = {300.0, 0.0};
  const auto frames = ramp_frames(sc, 0.008, 10000.0);
  const EventStream s = generate_events(frames, SensorConfig{});
  const auto rms = [&](Estimate est) {
    FrameRequest r = at({});
    r.initial = frames.front().grid;
    r.estimate = est;
    for (const auto& f : frames) r.timestamps.push_back(std::llround(f.t * 1e6));
    const auto rec = integrate_events(s, r);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < frames.size(); ++k)
      for (std::size_t i = 0; i < frames[k].grid.size(); ++i, ++n) sum += std::pow(rec[k].grid[i] - frames[k].grid[i], 2);
    return std::sqrt(sum / n);
  };
  const double ref = rms(Estimate::reference), mid = rms(Estimate::midpoint), interp = rms(Estimate::interpolated);
  CHECK(interp < ref);
  CHECK(interp < mid);
  FrameRequest bad = at({10}, 1.0);
  bad.estimate = Estimate::interpolated;
  CHECK_THROWS_AS(integrate_events(s, bad), DomainError);
}

TEST_CASE("integration errors") {
  CHECK_THROWS_AS(integrate_events(pixel_stream({{20, 0, 0, 1}, {10, 1, 0, 1}}), at({30})), DomainError);
  CHECK_THROWS_AS(integrate_events(pixel_stream({}), at({30, 10})), DomainError);
  FrameRequest r = at({10});
  r.initial = Grid<double>(3, 3);
  CHECK_THROWS_AS(integrate_events(pixel_stream({}), r), DomainError);
}

TEST_CASE("event_frame") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> px(0, 4), pol(0, 1), dt(0, 3);
  std::vector<Event> ev;
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += dt(rng);
    ev.push_back({t, static_cast<std::uint16_t>(px(rng)), static_cast<std::uint16_t>(px(rng)),
                  static_cast<std::int8_t>(pol(rng) ? 1 : -1)});
  }
  std::sort(ev.begin(), ev.end(), event_before);
  const EventStream s = pixel_stream(ev, 5, 5);
  for (auto [t0, t1] : {std::pair<std::int64_t, std::int64_t>{0, 100}, {37, 512}, {100, 2000}}) {
    Grid<std::int32_t> want(5, 5, 0);
    for (const Event& e : ev)
      if (e.t >= t0 && e.t < t1) want(e.x, e.y) += e.polarity;
    CHECK(event_frame(s, t0, t1) == want);
  }
  const auto a = event_frame(s, 0, 300), b = event_frame(s, 300, 5000), ab = event_frame(s, 0, 5000);
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == a[i] + b[i]);
  CHECK_THROWS_AS(event_frame(s, 5, 5), DomainError);
}

TEST_CASE("bin_to_lightfield") {
  const ScanCurve c = ScanCurve::circle(2.0, 250.0);
  std::vector<TimedGrid> frames;
  for (int k = 0; k <= 160; ++k) frames.push_back({k * 0.004 / 160, Grid<double>(2, 2, k)});
  const LightFieldVideo v = bin_to_lightfield(frames, c, 40);
  CHECK(v.views_per_period == 40);
  REQUIRE(v.periods.size() == 1);
  REQUIRE(v.periods[0].size() == 40);
  const auto centres = bin_centers(c, 40);
  for (int b = 0; b < 40; ++b) {
    const ViewOffset want = scan_eval(c, centres[b]);
    CHECK(v.periods[0].views[b].s == doctest::Approx(want.s));
    CHECK(v.periods[0].views[b].t == doctest::Approx(want.t));
    // bin centre (b + 0.5) T / 40 coincides with frame 4b + 2
    CHECK(v.periods[0].images[b].at(0, 0) == 4 * b + 2);
  }
  std::vector<TimedGrid> short_frames(frames.begin(), frames.begin() + 100);
  CHECK_THROWS_AS(bin_to_lightfield(short_frames, c, 40), DomainError);
  CHECK_THROWS_AS(bin_to_lightfield(frames, c, 2), DomainError);
}

TEST_CASE("parallel integration matches the serial reference bit for bit") {
  LayeredScene sc = test::two_layer_scene(40, 40, 6.0, 2.0);
  sc.layers[0].velocity = {700.0, 100.0};
  const auto frames = ramp_frames(sc, 0.006, 8000.0);
  const EventStream s = generate_events(frames, SensorConfig{});
  for (Estimate est : {Estimate::reference, Estimate::midpoint, Estimate::interpolated}) {
    for (double decay : {0.0, 50.0}) {
      if (est == Estimate::interpolated && decay > 0.0) continue;
      FrameRequest r = at({0, 777, 1500, 3001, 6000}, decay);
      r.estimate = est;
      r.initial = frames.front().grid;
      const auto want = reference::integrate_events(s, r);
      for (int threads : {1, 3}) {
        set_num_threads(threads);
        const auto got = integrate_events(s, r);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].grid == want[k].grid);
      }
    }
  }
  set_num_threads(0);
}
