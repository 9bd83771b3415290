#include "evfield/recon.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evf {

namespace {

void check_sorted(const EventStream& s) {
  for (std::size_t i = 1; i < s.events.size(); ++i)
    if (s.events[i].t < s.events[i - 1].t)
      throw DomainError("integrate_events: stream not sorted at event " + std::to_string(i));
}

}  // namespace

double detail::crossing_offset(int last_polarity, const Event& next, std::int64_t t_last, std::int64_t tau,
                               double up, double down) {
  const double u = static_cast<double>(tau - t_last) / static_cast<double>(next.t - t_last);
  const double step = next.polarity > 0 ? up : -down;
  if (last_polarity == 0 || last_polarity == next.polarity) return step * u;
  // Reversal: brightness passed an extremum between the two crossings. Model
  // it as a parabola that overshoots the last level by half a step (the mean
  // when the peak falls uniformly between levels) and lands on the next one.
  const double sign = last_polarity > 0 ? 1.0 : -1.0;
  const double h = 0.5 * (last_polarity > 0 ? up : down);
  const double fall = h + std::abs(step);
  const double q = std::sqrt(h) / (std::sqrt(h) + std::sqrt(fall));
  if (u <= q) {
    const double r = (u - q) / q;
    return sign * h * (1.0 - r * r);
  }
  const double r = (u - q) / (1.0 - q);
  return sign * (h - fall * r * r);
}

std::vector<TimedGrid> integrate_events(const EventStream& stream, const FrameRequest& req) {
  check_sorted(stream);
  if (!std::is_sorted(req.timestamps.begin(), req.timestamps.end()))
    throw DomainError("integrate_events: frame timestamps must be sorted");
  if (!(req.decay >= 0.0)) throw DomainError("integrate_events: decay must be >= 0");
  if (req.estimate == Estimate::interpolated && req.decay != 0.0)
    throw DomainError("integrate_events: interpolated frames need decay 0");
  const int w = stream.width, h = stream.height;
  if (req.initial && (req.initial->width() != w || req.initial->height() != h))
    throw DomainError("integrate_events: initial grid size mismatch");
  const double up = req.c_pos.value_or(stream.threshold);
  const double down = req.c_neg.value_or(stream.threshold);
  const double decay = req.decay;

  std::vector<TimedGrid> frames(req.timestamps.size());
  for (std::size_t f = 0; f < frames.size(); ++f)
    frames[f] = {static_cast<double>(req.timestamps[f]) * 1e-6, Grid<double>(w, h)};

  // Row bands, one per thread. Every thread sweeps the time-sorted stream
  // but only touches its own rows, so reads and frame writes stay sequential.
  const bool interp = req.estimate == Estimate::interpolated;
  const std::size_t ne = stream.events.size();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> next_of(interp ? ne : 0, none);
#pragma omp parallel
  {
    const int nt = omp_get_num_threads(), id = omp_get_thread_num();
    const int y0 = static_cast<int>(static_cast<long long>(h) * id / nt);
    const int y1 = static_cast<int>(static_cast<long long>(h) * (id + 1) / nt);
    const std::size_t base = static_cast<std::size_t>(y0) * w;
    const std::size_t m = static_cast<std::size_t>(y1 - y0) * w;
    std::vector<double> v(m), bias(m, 0.0);
    std::vector<std::int64_t> tp(m, req.initial_time);
    std::vector<std::int8_t> last_pol(m, 0);
    std::vector<std::size_t> pending(interp ? m : 0, none);
    for (std::size_t i = 0; i < m; ++i) v[i] = req.initial ? (*req.initial)[base + i] : 0.0;
    if (interp) {
      for (std::size_t k = ne; k-- > 0;) {
        const Event& e = stream.events[k];
        if (e.y < y0 || e.y >= y1) continue;
        const std::size_t i = static_cast<std::size_t>(e.y) * w + e.x - base;
        next_of[k] = pending[i];
        pending[i] = k;
      }
    }
    std::size_t k = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const std::int64_t tau = req.timestamps[f];
      for (; k < ne && stream.events[k].t <= tau; ++k) {
        const Event& e = stream.events[k];
        if (e.y < y0 || e.y >= y1) continue;
        const std::size_t i = static_cast<std::size_t>(e.y) * w + e.x - base;
        if (decay > 0.0) v[i] *= std::exp(-decay * static_cast<double>(std::max<std::int64_t>(0, e.t - tp[i])) * 1e-6);
        v[i] += e.polarity > 0 ? up : -down;
        tp[i] = e.t;
        last_pol[i] = e.polarity;
        if (interp) pending[i] = next_of[k];
        if (req.estimate == Estimate::midpoint) bias[i] = e.polarity > 0 ? 0.5 * up : -0.5 * down;
      }
      double* row = frames[f].grid.data().data() + base;
      for (std::size_t i = 0; i < m; ++i) {
        double out = v[i] + bias[i];
        if (interp && pending[i] != none && tau > tp[i])
          out += detail::crossing_offset(last_pol[i], stream.events[pending[i]], tp[i], tau, up, down);
        if (decay > 0.0) out *= std::exp(-decay * static_cast<double>(std::max<std::int64_t>(0, tau - tp[i])) * 1e-6);
        row[i] = out;
      }
    }
  }
  return frames;
}

Grid<std::int32_t> event_frame(const EventStream& stream, std::int64_t t0, std::int64_t t1) {
  if (!(t0 < t1)) throw DomainError("event_frame: t0 must be < t1");
  Grid<std::int32_t> g(stream.width, stream.height, 0);
  const auto first = std::lower_bound(stream.events.begin(), stream.events.end(), t0,
                                      [](const Event& e, std::int64_t t) { return e.t < t; });
  for (auto it = first; it != stream.events.end() && it->t < t1; ++it) g(it->x, it->y) += it->polarity;
  return g;
}

std::vector<double> bin_centers(const ScanCurve& curve, int bins, long long period_index) {
  if (bins < 1) throw DomainError("bin_centers: bins must be positive");
  std::vector<double> c(static_cast<std::size_t>(bins));
  const double width = curve.period / bins;
  for (int b = 0; b < bins; ++b)
    c[b] = static_cast<double>(period_index) * curve.period + (b + 0.5) * width;
  return c;
}

LightFieldVideo bin_to_lightfield(std::span<const TimedGrid> frames, const ScanCurve& curve,
                                  int bins) {
  curve.validate();
  if (bins < 3) throw DomainError("bin_to_lightfield: need at least 3 bins");
  if (frames.empty()) throw DomainError("bin_to_lightfield: no frames");
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (!(frames[i].t > frames[i - 1].t))
      throw DomainError("bin_to_lightfield: frame timestamps must be strictly increasing");

  const double T = curve.period;
  const double half = 0.5 * T / bins;
  const double eps = 1e-9 * T;
  const double first = frames.front().t, last = frames.back().t;
  const auto p_min = static_cast<long long>(std::ceil((first - half - eps) / T));
  const auto p_max = static_cast<long long>(std::floor((last + half + eps) / T)) - 1;
  if (p_max < p_min)
    throw DomainError("bin_to_lightfield: frames do not cover a full scan period");

  std::vector<ViewOffset> views;
  for (double tc : bin_centers(curve, bins, 0)) views.push_back(scan_eval(curve, tc));

  LightFieldVideo video;
  video.views_per_period = bins;
  for (long long p = p_min; p <= p_max; ++p) {
    LightField lf;
    lf.views = views;
    lf.timestamp = static_cast<double>(p) * T;
    for (double tc : bin_centers(curve, bins, p)) {
      auto it = std::lower_bound(frames.begin(), frames.end(), tc,
                                 [](const TimedGrid& f, double t) { return f.t < t; });
      if (it == frames.end()) {
        --it;
      } else if (it != frames.begin() && (tc - std::prev(it)->t) <= (it->t - tc)) {
        --it;
      }
      lf.images.emplace_back(it->grid);
    }
    video.periods.push_back(std::move(lf));
  }
  return video;
}

}  // namespace evf
