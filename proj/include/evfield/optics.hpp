#pragma once

#include <functional>
#include <vector>

#include "evfield/plenoptic.hpp"

namespace evf {

enum class MosaicKind { kaleidoscope, microlens };

struct TileFlip {
  bool x = false;
  bool y = false;
  friend bool operator==(const TileFlip&, const TileFlip&) = default;
};

/// Spatial multiplexing layout. Views are ordered row-major over tiles:
/// view index = j * nx + i, where (i, j) is the tile (kaleidoscope) or the
/// intra-lenslet sub-pixel (microlens).
struct MosaicLayout {
  MosaicKind kind = MosaicKind::kaleidoscope;
  int nx = 1, ny = 1;  // angular views per axis
  int rx = 1, ry = 1;  // sensor resolution
  std::vector<TileFlip> flips;  // nx*ny entries or empty; kaleidoscope only

  int tile_width() const noexcept { return rx / nx; }
  int tile_height() const noexcept { return ry / ny; }
  int view_count() const noexcept { return nx * ny; }
  void validate() const;

  /// Mirror-bounce default: tile (i, j) is flipped in x when i is an odd
  /// distance from the centre tile and in y when j is.
  static MosaicLayout kaleidoscope(int nx, int ny, int rx, int ry);
  static MosaicLayout microlens(int nx, int ny, int rx, int ry);

  friend bool operator==(const MosaicLayout&, const MosaicLayout&) = default;
};

/// Where a sensor pixel's sample comes from.
struct MosaicSource {
  int view = 0;
  int x = 0;
  int y = 0;
};
MosaicSource mosaic_source(const MosaicLayout& layout, int x, int y);

Image spatial_mux(const LightField& lf, const MosaicLayout& layout);
LightField spatial_demux(const Image& mosaic, const MosaicLayout& layout,
                         const std::vector<ViewOffset>& views = {});

/// Lissajous aperture trajectory
///   C(t) = (a_s sin(2 pi f_s t + phi_s), a_t sin(2 pi f_t t + phi_t)).
struct ScanCurve {
  double amplitude_s = 0.0, amplitude_t = 0.0;
  double frequency_s = 0.0, frequency_t = 0.0;  // Hz
  double phase_s = 0.0, phase_t = 0.0;          // rad
  double period = 1.0;                          // s

  /// Circle of the given radius; phase_t = phase + pi/2 so C(0) = r (sin phase, cos phase).
  static ScanCurve circle(double radius, double frequency, double phase = 0.0);
  void validate() const;
  friend bool operator==(const ScanCurve&, const ScanCurve&) = default;
};

ViewOffset scan_eval(const ScanCurve& curve, double t);

/// Frames k = 0, 1, ... at t_k = t0 + k / sample_rate while t_k <= t1.
std::vector<double> scan_sample_times(double t0, double t1, double sample_rate);

std::vector<TimedImage> temporal_mux(const LayeredScene& scene, const ScanCurve& curve, double t0,
                                     double t1, double sample_rate);

/// Streaming form of temporal_mux: hands each frame to `sink` in timestamp
/// order instead of materialising the whole sequence.
void temporal_mux_each(const LayeredScene& scene, const ScanCurve& curve, double t0, double t1,
                       double sample_rate, const std::function<void(TimedImage&&)>& sink);

}  // namespace evf
