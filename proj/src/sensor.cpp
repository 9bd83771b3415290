#include "evfield/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evf {

namespace {

constexpr std::int64_t kNoEvent = std::numeric_limits<std::int64_t>::min();

int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void sort_events(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), event_before);
}

}  // namespace

std::uint64_t detail::mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void EventStream::validate() const {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535)
    throw DomainError("event stream: invalid sensor size");
  if (!(threshold > 0.0f)) throw DomainError("event stream: threshold must be positive");
  std::vector<std::int64_t> last(static_cast<std::size_t>(width) * height, kNoEvent);
  std::int64_t prev = kNoEvent;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const std::string at = " at event " + std::to_string(i);
    if (e.x >= width || e.y >= height) throw DomainError("event out of bounds" + at);
    if (e.polarity != 1 && e.polarity != -1) throw DomainError("event polarity must be +-1" + at);
    if (e.t < 0) throw DomainError("negative event timestamp" + at);
    if (e.t < prev) throw DomainError("event timestamps not sorted" + at);
    auto& l = last[static_cast<std::size_t>(e.y) * width + e.x];
    if (e.t <= l) throw DomainError("per-pixel timestamps not strictly increasing" + at);
    l = prev = e.t;
  }
}

void SensorConfig::validate() const {
  if (!(c_pos > 0.0) || !(c_neg > 0.0)) throw DomainError("sensor: thresholds must be positive");
  if (refractory_us < 0) throw DomainError("sensor: refractory must be >= 0");
  if (!(log_floor > 0.0)) throw DomainError("sensor: log floor must be positive");
  if (!(noise_rate >= 0.0)) throw DomainError("sensor: noise rate must be >= 0");
  if (!(bandwidth_cap > 0.0)) throw DomainError("sensor: bandwidth cap must be positive");
}

Grid<double> brightness(const Image& img, double log_floor) {
  if (!(log_floor > 0.0)) throw DomainError("brightness: log floor must be positive");
  Grid<double> b = luminance(img);
  auto d = b.data();
  const auto n = static_cast<std::ptrdiff_t>(d.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = std::log(std::max(log_floor, d[i]));
  return b;
}

EventGenerator::EventGenerator(int width, int height, const SensorConfig& cfg)
    : width_(width), height_(height), cfg_(cfg) {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535)
    throw DomainError("EventGenerator: invalid sensor size");
  cfg_.validate();
  const auto n = static_cast<std::size_t>(width) * height;
  prev_b_.resize(n);
  ref_.resize(n);
  last_.assign(n, kNoEvent);
  buffers_.resize(static_cast<std::size_t>(max_threads()));
}

void EventGenerator::push(double t, const Grid<double>& frame) {
  if (frame.width() != width_ || frame.height() != height_)
    throw DomainError("EventGenerator: frame size mismatch");
  if (!std::isfinite(t)) throw DomainError("EventGenerator: non-finite timestamp");
  if (frames_ == 0) {
    std::copy(frame.data().begin(), frame.data().end(), prev_b_.begin());
    std::copy(frame.data().begin(), frame.data().end(), ref_.begin());
    prev_t_ = t;
    ++frames_;
    return;
  }
  if (!(t > prev_t_))
    throw DomainError("generate_events: frame timestamps must be strictly increasing (frame " +
                      std::to_string(frames_) + ")");
  if (buffers_.size() < static_cast<std::size_t>(max_threads()))
    buffers_.resize(static_cast<std::size_t>(max_threads()));

  const double ta = prev_t_, tb = t, dt = tb - ta;
  const double cp = cfg_.c_pos, cn = cfg_.c_neg;
  const std::int64_t refractory = cfg_.refractory_us;
  const int w = width_;

#pragma omp parallel
  {
    std::vector<Event>& out = buffers_[static_cast<std::size_t>(thread_index())];
#pragma omp for schedule(static)
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double ba = prev_b_[i], bb = frame[i];
        prev_b_[i] = bb;
        if (bb == ba) continue;
        const double db = bb - ba;
        double r = ref_[i];
        double cur = ba;
        std::int64_t last = last_[i];
        for (;;) {
          double level;
          std::int8_t pol;
          if (db > 0.0) {
            level = r + cp;
            if (!(cur < level && level <= bb)) break;
            pol = 1;
          } else {
            level = r - cn;
            if (!(cur > level && level >= bb)) break;
            pol = -1;
          }
          const double tc = ta + (level - ba) / db * dt;
          std::int64_t tus = std::llround(tc * 1e6);
          cur = level;
          if (last != kNoEvent && tus - last < refractory) continue;  // suppressed, R stays
          if (last != kNoEvent && tus <= last) tus = last + 1;
          out.push_back({tus, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), pol});
          r = level;
          last = tus;
        }
        ref_[i] = r;
        last_[i] = last;
      }
    }
  }
  prev_t_ = t;
  ++frames_;
}

EventStream EventGenerator::finish() {
  if (frames_ < 2) throw DomainError("generate_events: need at least two frames");
  EventStream s;
  s.width = width_;
  s.height = height_;
  s.threshold = static_cast<float>(cfg_.c_pos);
  std::size_t total = 0;
  for (const auto& b : buffers_) total += b.size();
  s.events.reserve(total);
  for (auto& b : buffers_) {
    s.events.insert(s.events.end(), b.begin(), b.end());
    std::vector<Event>().swap(b);
  }
  sort_events(s.events);
  return s;
}

EventStream generate_events(std::span<const TimedGrid> frames, const SensorConfig& cfg) {
  if (frames.size() < 2) throw DomainError("generate_events: need at least two frames");
  EventGenerator gen(frames.front().grid.width(), frames.front().grid.height(), cfg);
  for (const auto& f : frames) gen.push(f.t, f.grid);
  EventStream s = gen.finish();
  s.span = TimeSpan{std::llround(frames.front().t * 1e6), std::llround(frames.back().t * 1e6) + 1};
  return s;
}

EventStream add_noise(const EventStream& stream, const SensorConfig& cfg) {
  cfg.validate();
  if (cfg.noise_rate == 0.0) return stream;
  TimeSpan span;
  if (stream.span) {
    span = *stream.span;
  } else if (!stream.events.empty()) {
    span = {stream.events.front().t, stream.events.back().t + 1};
  } else {
    return stream;
  }
  if (span.end <= span.begin) return stream;
  const double duration = static_cast<double>(span.end - span.begin) * 1e-6;
  const double mean = cfg.noise_rate * duration;
  const int w = stream.width, h = stream.height;

  std::vector<std::vector<Event>> rows(static_cast<std::size_t>(h));
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    auto& row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < w; ++x) {
      const std::uint64_t pixel = static_cast<std::uint64_t>(y) * w + x;
      std::mt19937_64 rng(detail::mix_seed(cfg.seed, pixel));
      std::poisson_distribution<long long> count(mean);
      std::uniform_int_distribution<std::int64_t> when(span.begin, span.end - 1);
      std::bernoulli_distribution positive(0.5);
      const long long k = count(rng);
      for (long long j = 0; j < k; ++j) {
        const std::int64_t t = when(rng);
        row.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                       static_cast<std::int8_t>(positive(rng) ? 1 : -1)});
      }
    }
  }

  // merge, keeping the earliest-listed event when a pixel timestamp collides
  struct Tagged {
    Event e;
    bool noise;
  };
  std::vector<Tagged> all;
  all.reserve(stream.events.size());
  for (const auto& e : stream.events) all.push_back({e, false});
  for (const auto& row : rows)
    for (const auto& e : row) all.push_back({e, true});
  std::stable_sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) {
    if (event_before(a.e, b.e)) return true;
    if (event_before(b.e, a.e)) return false;
    return !a.noise && b.noise;
  });
  EventStream out = stream;
  out.events.clear();
  out.events.reserve(all.size());
  for (const auto& t : all) {
    if (!out.events.empty()) {
      const Event& p = out.events.back();
      if (p.t == t.e.t && p.x == t.e.x && p.y == t.e.y) continue;
    }
    out.events.push_back(t.e);
  }
  return out;
}

EventStream apply_bandwidth_limit(const EventStream& stream, const SensorConfig& cfg) {
  if (!(cfg.bandwidth_cap > 0.0)) throw DomainError("bandwidth limit: cap must be positive");
  if (std::isinf(cfg.bandwidth_cap)) return stream;
  const auto keep = static_cast<std::size_t>(std::floor(cfg.bandwidth_cap / 1000.0));
  EventStream out = stream;
  out.events.clear();
  out.events.reserve(std::min(stream.events.size(), keep * 1024));
  const auto& ev = stream.events;
  std::vector<std::size_t> index, chosen;
  std::size_t i = 0;
  while (i < ev.size()) {
    const std::int64_t window = ev[i].t / 1000;
    std::size_t j = i;
    while (j < ev.size() && ev[j].t / 1000 == window) ++j;
    const std::size_t n = j - i;
    if (n <= keep) {
      out.events.insert(out.events.end(), ev.begin() + static_cast<std::ptrdiff_t>(i),
                        ev.begin() + static_cast<std::ptrdiff_t>(j));
    } else {
      std::mt19937_64 rng(detail::mix_seed(cfg.seed ^ 0xB4D0B4D0ULL, static_cast<std::uint64_t>(window)));
      index.resize(n);
      for (std::size_t k = 0; k < n; ++k) index[k] = i + k;
      chosen.clear();
      std::sample(index.begin(), index.end(), std::back_inserter(chosen), keep, rng);
      for (std::size_t k : chosen) out.events.push_back(ev[k]);
    }
    i = j;
  }
  return out;
}

}  // namespace evf
