#pragma once

// Single-threaded reference versions of the OpenMP kernels. They follow the
// textbook loop order (per pixel over the whole sequence, global event sweep,
// direct window sums) and exist so tests and benchmarks have something
// independent to compare the parallel kernels against.

#include <span>
#include <vector>

#include "evfield/lfops.hpp"
#include "evfield/plenoptic.hpp"
#include "evfield/recon.hpp"
#include "evfield/sensor.hpp"

namespace evf::reference {

Image render_view(const LayeredScene& scene, ViewOffset view, double time);

/// Pixel-major: each pixel walks the full frame sequence before the next.
EventStream generate_events(std::span<const TimedGrid> frames, const SensorConfig& cfg);

/// One pass over the time-sorted stream with per-pixel state, snapshotting
/// every pixel at each requested timestamp.
std::vector<TimedGrid> integrate_events(const EventStream& stream, const FrameRequest& req);

/// Shift every view into place first, then average.
Image refocus_shift(const LightField& lf, double shift);

/// Window statistics summed directly per output pixel.
Grid<double> sharpness(const Image& img, int window = 7);

}  // namespace evf::reference
