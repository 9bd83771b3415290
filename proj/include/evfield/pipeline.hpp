#pragma once

// End-to-end capture and reconstruction paths: scene -> optics -> sensor ->
// events, and events -> frames -> light field.

#include <cstdint>
#include <vector>

#include "evfield/lfops.hpp"
#include "evfield/optics.hpp"
#include "evfield/plenoptic.hpp"
#include "evfield/recon.hpp"
#include "evfield/sensor.hpp"

namespace evf::pipeline {

/// Galvanometer capture: the scan curve steers the viewpoint, frames are
/// rendered at `sample_rate` over [t0, t1] and fed to the event sensor,
/// then noise and the readout cap are applied.
EventStream simulate_galvo(const LayeredScene& scene, const ScanCurve& curve, double t0, double t1,
                           double sample_rate, const SensorConfig& cfg);

/// Spatially multiplexed capture. Views sit on a grid_views(nx, ny, pitch)
/// aperture grid and are rendered at tile resolution (the scene is box-
/// downscaled by nx, which must equal ny and divide the sensor size).
EventStream simulate_spatial(const LayeredScene& scene, const MosaicLayout& layout, double pitch,
                             double t0, double t1, double sample_rate, const SensorConfig& cfg);

/// Noise-free log brightness the galvanometer sensor sees at time t.
Grid<double> galvo_brightness(const LayeredScene& scene, const ScanCurve& curve, double t,
                              double log_floor = 1e-4);

/// Tile-resolution scene and aperture views used by simulate_spatial.
LayeredScene tile_scene(const LayeredScene& scene, const MosaicLayout& layout);
std::vector<ViewOffset> spatial_views(const MosaicLayout& layout, double pitch);

/// Light field of scan period `period`: one frame per phase bin, integrated
/// straight at the bin-centre time (equivalent to binning an arbitrarily
/// dense frame sequence). Views are in aperture units.
LightField galvo_lightfield(const EventStream& stream, const ScanCurve& curve, int bins,
                            long long period, const FrameRequest& base);

/// Light field at time t_us from a mosaic stream.
LightField spatial_lightfield(const EventStream& stream, const MosaicLayout& layout, double pitch,
                              std::int64_t t_us, const FrameRequest& base);

/// Timestamps t0, t0 + step, ... <= t1 (microseconds).
std::vector<std::int64_t> frame_times(std::int64_t t0, std::int64_t t1, std::int64_t step);

}  // namespace evf::pipeline
