#include <algorithm>
#include <cmath>
#include <limits>

#include "evfield/reference.hpp"

namespace evf::reference {

EventStream generate_events(std::span<const TimedGrid> frames, const SensorConfig& cfg) {
  cfg.validate();
  if (frames.size() < 2) throw DomainError("generate_events: need at least two frames");
  const int w = frames.front().grid.width(), h = frames.front().grid.height();
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (!frames[k].grid.same_shape(frames.front().grid)) throw DomainError("generate_events: frame size mismatch");
    if (!(frames[k].t > frames[k - 1].t)) throw DomainError("generate_events: timestamps must increase");
  }
  constexpr std::int64_t none = std::numeric_limits<std::int64_t>::min();
  EventStream s;
  s.width = w;
  s.height = h;
  s.threshold = static_cast<float>(cfg.c_pos);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = frames.front().grid(x, y);
      std::int64_t last = none;
      for (std::size_t k = 1; k < frames.size(); ++k) {
        const double ba = frames[k - 1].grid(x, y), bb = frames[k].grid(x, y);
        if (bb == ba) continue;
        const double ta = frames[k - 1].t, dt = frames[k].t - ta, db = bb - ba;
        double cur = ba;
        for (;;) {
          const bool up = db > 0.0;
          const double level = up ? r + cfg.c_pos : r - cfg.c_neg;
          if (up ? !(cur < level && level <= bb) : !(cur > level && level >= bb)) break;
          std::int64_t tus = std::llround((ta + (level - ba) / db * dt) * 1e6);
          cur = level;
          if (last != none && tus - last < cfg.refractory_us) continue;
          if (last != none && tus <= last) tus = last + 1;
          s.events.push_back({tus, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                              static_cast<std::int8_t>(up ? 1 : -1)});
          r = level;
          last = tus;
        }
      }
    }
  }
  std::sort(s.events.begin(), s.events.end(), event_before);
  s.span = TimeSpan{std::llround(frames.front().t * 1e6), std::llround(frames.back().t * 1e6) + 1};
  return s;
}

std::vector<TimedGrid> integrate_events(const EventStream& stream, const FrameRequest& req) {
  if (!std::is_sorted(req.timestamps.begin(), req.timestamps.end()))
    throw DomainError("integrate_events: frame timestamps must be sorted");
  if (req.estimate == Estimate::interpolated && req.decay != 0.0)
    throw DomainError("integrate_events: interpolated frames need decay 0");
  const int w = stream.width, h = stream.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const double up = req.c_pos.value_or(stream.threshold);
  const double down = req.c_neg.value_or(stream.threshold);
  std::vector<double> v(n, 0.0);
  if (req.initial) std::copy(req.initial->data().begin(), req.initial->data().end(), v.begin());
  std::vector<std::int64_t> tp(n, req.initial_time);
  std::vector<double> bias(n, 0.0);
  std::vector<int> last_pol(n, 0);
  // next unconsumed event of every pixel, for interpolated frames
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  const std::size_t ne = stream.events.size();
  std::vector<std::size_t> next_of(ne, none), pending(n, none);
  for (std::size_t k = ne; k-- > 0;) {
    const std::size_t i = static_cast<std::size_t>(stream.events[k].y) * w + stream.events[k].x;
    next_of[k] = pending[i];
    pending[i] = k;
  }

  std::vector<TimedGrid> frames;
  std::size_t k = 0;
  for (const std::int64_t tau : req.timestamps) {
    for (; k < stream.events.size() && stream.events[k].t <= tau; ++k) {
      const Event& e = stream.events[k];
      if (k > 0 && e.t < stream.events[k - 1].t) throw DomainError("integrate_events: stream not sorted");
      const std::size_t i = static_cast<std::size_t>(e.y) * w + e.x;
      if (req.decay > 0.0) v[i] *= std::exp(-req.decay * static_cast<double>(std::max<std::int64_t>(0, e.t - tp[i])) * 1e-6);
      v[i] += e.polarity > 0 ? up : -down;
      tp[i] = e.t;
      pending[i] = next_of[k];
      last_pol[i] = e.polarity;
      if (req.estimate == Estimate::midpoint) bias[i] = e.polarity > 0 ? 0.5 * up : -0.5 * down;
    }
    TimedGrid f{static_cast<double>(tau) * 1e-6, Grid<double>(w, h)};
    for (std::size_t i = 0; i < n; ++i) {
      double out = v[i] + bias[i];
      if (req.estimate == Estimate::interpolated && pending[i] != none && tau > tp[i]) {
        out += evf::detail::crossing_offset(last_pol[i], stream.events[pending[i]], tp[i], tau, up, down);
      }
      if (req.decay > 0.0) out *= std::exp(-req.decay * static_cast<double>(std::max<std::int64_t>(0, tau - tp[i])) * 1e-6);
      f.grid[i] = out;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace evf::reference
