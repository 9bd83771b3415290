// Serial reference kernels against their OpenMP counterparts.
//   evf_bench --benchmark_filter=events
#include <benchmark/benchmark.h>

#include <numbers>
#include <thread>

#include "evfield/lfops.hpp"
#include "evfield/optics.hpp"
#include "evfield/parallel.hpp"
#include "evfield/recon.hpp"
#include "evfield/reference.hpp"
#include "evfield/sensor.hpp"
#include "evfield/textures.hpp"

namespace {

using namespace evf;

LayeredScene bench_scene() {
  LayeredScene s;
  s.width = 256;
  s.height = 256;
  s.focus_distance = 3.0;
  s.disparity_constant = 8.0;
  s.background.texture = textures::noise(288, 288, 1, 0.2, 1.0, 1.5);
  s.background.depth = 6.0;
  s.background.position = {-16, -16};
  SceneLayer l;
  l.texture = textures::noise(96, 96, 2, 0.1, 1.0, 1.0);
  l.alpha = textures::rect_alpha(96, 96, 4, 4, 92, 92);
  l.depth = 2.0;
  l.position = {80, 80};
  l.velocity = {600, 0};
  s.layers.push_back(std::move(l));
  return s;
}

const std::vector<TimedGrid>& frames() {
  static const std::vector<TimedGrid> f = [] {
    std::vector<TimedGrid> out;
    for (auto& im : temporal_mux(bench_scene(), ScanCurve::circle(3.0, 250.0), 0.0, 0.004, 10000.0))
      out.push_back({im.t, brightness(im.image)});
    return out;
  }();
  return f;
}

const EventStream& stream() {
  static const EventStream s = generate_events(frames(), SensorConfig{});
  return s;
}

const LightField& lightfield() {
  static const LightField lf = [] {
    std::vector<ViewOffset> v;
    for (int i = 0; i < 40; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 40;
      v.push_back({3.0 * std::sin(a), 3.0 * std::cos(a)});
    }
    return render_lightfield(bench_scene(), v, 0.0);
  }();
  return lf;
}

FrameRequest request() {
  FrameRequest r;
  r.decay = 0.0;
  for (std::int64_t t = 100; t <= 4000; t += 100) r.timestamps.push_back(t);
  return r;
}

// range(0) == 0 runs the serial reference, otherwise the parallel kernel with that many threads
void threads_arg(benchmark::State& st) { set_num_threads(st.range(0) == 0 ? 1 : static_cast<int>(st.range(0))); }

void BM_render_view(benchmark::State& st) {
  threads_arg(st);
  const LayeredScene s = bench_scene();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) == 0 ? reference::render_view(s, {1.0, 2.0}, 0.001)
                                              : render_view(s, {1.0, 2.0}, 0.001));
}

void BM_generate_events(benchmark::State& st) {
  threads_arg(st);
  const auto& f = frames();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) == 0 ? reference::generate_events(f, SensorConfig{})
                                              : generate_events(f, SensorConfig{}));
  st.counters["events"] = static_cast<double>(stream().size());
}

void BM_integrate_events(benchmark::State& st) {
  threads_arg(st);
  const FrameRequest r = request();
  stream();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) == 0 ? reference::integrate_events(stream(), r)
                                              : integrate_events(stream(), r));
}

void BM_refocus(benchmark::State& st) {
  threads_arg(st);
  lightfield();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) == 0 ? reference::refocus_shift(lightfield(), 1.3)
                                              : refocus_shift(lightfield(), 1.3));
}

void BM_sharpness(benchmark::State& st) {
  threads_arg(st);
  const Image& img = lightfield().images.front();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) == 0 ? reference::sharpness(img, 7) : sharpness(img, 7));
}

void thread_args(benchmark::internal::Benchmark* b) {
  b->Arg(0)->Arg(1);
  for (int n = 2; n <= static_cast<int>(std::thread::hardware_concurrency()); n *= 2) b->Arg(n);
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_render_view)->Apply(thread_args);
BENCHMARK(BM_generate_events)->Apply(thread_args);
BENCHMARK(BM_integrate_events)->Apply(thread_args);
BENCHMARK(BM_refocus)->Apply(thread_args);
BENCHMARK(BM_sharpness)->Apply(thread_args);

BENCHMARK_MAIN();
