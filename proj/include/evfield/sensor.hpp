#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "evfield/image.hpp"
#include "evfield/optics.hpp"

namespace evf {

struct Event {
  std::int64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // +1 or -1
  friend bool operator==(const Event&, const Event&) = default;
};

/// Half-open time window [begin, end) in microseconds.
struct TimeSpan {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  float threshold = 0.1f;  // C, natural-log units
  // provenance, optional
  std::optional<ScanCurve> scan;
  std::optional<MosaicLayout> layout;
  std::optional<TimeSpan> span;

  std::size_t size() const noexcept { return events.size(); }
  /// Bounds, global time order and strictly increasing per-pixel timestamps.
  void validate() const;
  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Global event order: time, then row, then column.
inline bool event_before(const Event& a, const Event& b) noexcept {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

struct SensorConfig {
  double c_pos = 0.1;
  double c_neg = 0.1;
  std::int64_t refractory_us = 0;
  double log_floor = 1e-4;
  double noise_rate = 0.0;  // events / pixel / second
  double bandwidth_cap = std::numeric_limits<double>::infinity();  // events / second
  std::uint64_t seed = 0;

  void validate() const;
};

/// B = ln(max(floor, I)) on the channel mean.
Grid<double> brightness(const Image& img, double log_floor = 1e-4);

/// Incremental level-crossing simulator. Feed brightness frames in strictly
/// increasing time order; finish() returns the merged, time-sorted stream.
/// Each pixel keeps a reference level R (initialised from the first frame);
/// brightness is linearly interpolated between frames and every crossing of
/// R + c_pos (upward) or R - c_neg (downward) emits an event at the
/// interpolated time and moves R by that threshold. A crossing inside the
/// refractory window is dropped and leaves R where it was.
class EventGenerator {
 public:
  EventGenerator(int width, int height, const SensorConfig& cfg);

  void push(double t_seconds, const Grid<double>& frame);
  std::size_t frames_seen() const noexcept { return frames_; }
  /// Reference level of every pixel (for tests and diagnostics).
  const std::vector<double>& reference() const noexcept { return ref_; }
  EventStream finish();

 private:
  int width_, height_;
  SensorConfig cfg_;
  std::size_t frames_ = 0;
  double prev_t_ = 0.0;
  std::vector<double> prev_b_;
  std::vector<double> ref_;
  std::vector<std::int64_t> last_;  // last event time, INT64_MIN if none
  std::vector<std::vector<Event>> buffers_;  // one per thread
};

/// Batch form over a timed brightness sequence (>= 2 frames).
EventStream generate_events(std::span<const TimedGrid> frames, const SensorConfig& cfg);

/// Background activity: Poisson spurious events per pixel at cfg.noise_rate
/// over the stream's span (or its first..last event window), random
/// polarity, per-pixel RNG streams derived from (seed, pixel).
EventStream add_noise(const EventStream& stream, const SensorConfig& cfg);

/// Readout cap: in each 1 ms window holding more than cap/1000 events keep a
/// seeded uniformly random subset of exactly that many, preserving order.
EventStream apply_bandwidth_limit(const EventStream& stream, const SensorConfig& cfg);

namespace detail {
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;
}

}  // namespace evf
