#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evfield/optics.hpp"
#include "evfield/sensor.hpp"

namespace evf {

enum class Estimate { reference, midpoint, interpolated };

struct FrameRequest {
  std::vector<std::int64_t> timestamps;  // microseconds, sorted
  double decay = 1.0;                    // 1/s leaky-integrator rate
  std::optional<Grid<double>> initial;   // zeros when absent
  std::int64_t initial_time = 0;         // time at which `initial` holds
  // Per-polarity step; defaults to the stream threshold for both.
  std::optional<double> c_pos;
  std::optional<double> c_neg;
  // What a frame reports between events. `reference` is the sensor's
  // reference level R. `midpoint` adds half a step in the direction of the
  // pixel's last event, since brightness sits past the last crossed level.
  // `interpolated` reads the stream offline: each event marks the moment
  // brightness crossed a known level, so frames interpolate linearly between
  // the pixel's neighbouring crossings. Needs decay 0.
  Estimate estimate = Estimate::reference;
};

/// B(x, t) = B0(x) e^{-decay (t - t0)} + sum_k step(p_k) e^{-decay (t - t_k)}
/// over events t_k <= t, sampled at each requested timestamp.
std::vector<TimedGrid> integrate_events(const EventStream& stream, const FrameRequest& req);

/// Per-pixel polarity sum over events in [t0, t1).
Grid<std::int32_t> event_frame(const EventStream& stream, std::int64_t t0, std::int64_t t1);

struct LightFieldVideo {
  std::vector<LightField> periods;
  int views_per_period = 0;
};

/// Splits each complete scan period into `bins` phase bins. A bin takes the
/// frame nearest its centre (earlier frame on ties) and the view offset of
/// the curve at the bin-centre phase; every period shares one view list.
LightFieldVideo bin_to_lightfield(std::span<const TimedGrid> frames, const ScanCurve& curve,
                                  int bins);

namespace detail {
// Offset from the last crossed level at time tau for interpolated frames,
// given the pixel's last polarity (0 if none yet) and its next event.
double crossing_offset(int last_polarity, const Event& next, std::int64_t t_last, std::int64_t tau,
                       double up, double down);
}  // namespace detail

/// Bin-centre times (seconds) of period `p`.
std::vector<double> bin_centers(const ScanCurve& curve, int bins, long long period_index = 0);

}  // namespace evf
