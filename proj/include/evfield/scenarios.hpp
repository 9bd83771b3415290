#pragma once

// Scenario runners shared by the command-line tool and the acceptance suite.
// A scenario is a JSON document holding a scene plus the capture,
// reconstruction and measurement settings of one experiment; see
// scenarios/*.json and docs/scenarios.md.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evfield/calib.hpp"
#include "evfield/io.hpp"
#include "evfield/lfops.hpp"
#include "evfield/metrics.hpp"
#include "evfield/optics.hpp"
#include "evfield/recon.hpp"
#include "evfield/sensor.hpp"

namespace evf::scenarios {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Scenario {
  json doc;
  fs::path dir;  // texture paths resolve against this

  static Scenario load(const fs::path& path);
  /// Every procedural texture seed is shifted by `seed_offset`.
  LayeredScene scene(std::uint64_t seed_offset = 0) const;
  SensorConfig sensor(std::uint64_t seed) const;
  /// "reconstruction" block; timestamps are left empty.
  FrameRequest reconstruction() const;
  /// true when the reconstruction starts from the simulator's first frame.
  bool true_initial() const;
  const json& section(const char* key) const;
  bool has(const char* key) const { return doc.contains(key); }
};

struct GalvoSetup {
  ScanCurve curve;
  double sample_rate = 0.0;
  int bins = 20;
};
GalvoSetup galvo_setup(const json& block);

struct SpatialSetup {
  MosaicLayout layout;
  double pitch = 1.0;
  double sample_rate = 0.0;
};
SpatialSetup spatial_setup(const json& block, MosaicKind kind, int width, int height);

/// Images are written here when `dir` is non-empty.
struct Output {
  fs::path dir;
  bool enabled() const { return !dir.empty(); }
};

/// [x, y, w, h] or a list of them.
std::vector<PatchRect> patches_from_json(const json& j);
/// Tracks every patch against frame 0 and keeps the one with the highest mean NCC.
ShiftTrack best_track(std::span<const Image> frames, const std::vector<PatchRect>& patches, int search_radius);

// ---- experiments ---------------------------------------------------------

struct FidelityRun {
  double max_error = 0.0;
  double threshold = 0.0;
  std::size_t events = 0;
};
/// Ramp scene through generate_events, integrated back from the true first
/// frame with decay 0; worst final-frame error.
FidelityRun run_fidelity(const Scenario& sc, std::uint64_t seed, const Output& out);

struct CompareRun {
  std::vector<double> speeds;
  std::vector<double> galvo_sharpness;
  std::vector<double> spatial_sharpness;
  std::vector<std::size_t> galvo_events;
  std::vector<std::size_t> spatial_events;
  std::size_t spatial_static_events = 0;  // inside the static layer's footprint
  double galvo_static_energy = 0.0;
  double spatial_static_energy = 0.0;
};
CompareRun run_compare(const Scenario& sc, std::uint64_t seed, const Output& out);

struct EdgeRun {
  metrics::OrientedEnergy galvo;
  metrics::OrientedEnergy spatial;
};
EdgeRun run_edges(const Scenario& sc, std::uint64_t seed, const Output& out);

struct CalibrationRun {
  CalibrationResult result;
  double true_radius = 0.0;
  double true_phase = 0.0;
  double radius_error = 0.0;      // relative
  double phase_error_deg = 0.0;   // wrapped to (-180, 180]
  double max_view_error = 0.0;    // shift px, self-calibrated vs truth
  double known_curve_error = 0.0; // binned views vs the scan formula
  int views_per_period = 0;
  std::size_t events = 0;
  double mean_score = 0.0;
};
/// seed 0 uses the configured phase; other seeds draw a random phase and
/// shift the texture seeds.
CalibrationRun run_calibration(const Scenario& sc, std::uint64_t seed, const Output& out);

struct DepthRun {
  double fraction_within = 0.0;  // of valid textured pixels
  std::size_t valid = 0;
  std::size_t textured = 0;
  double gain_agreement = 0.0;   // fraction of pixels with the same argmax slice under gain
  DepthMap map;
};
DepthRun run_depth(const Scenario& sc, const Output& out);

struct DepthFitRun {
  DepthFit fit;
  double true_slope = 0.0;
  double true_intercept = 0.0;
  double depth_span = 0.0;
};
DepthFitRun run_depth_fit(const Scenario& sc, std::uint64_t seed);

struct BandwidthRun {
  std::vector<double> frequencies;
  std::vector<double> dropped;
  std::vector<double> static_detail;
  std::vector<double> moving_detail;
  std::vector<std::size_t> events_in;
  double saturating_frequency = 0.0;  // first frequency over the drop threshold, 0 if none
};
BandwidthRun run_bandwidth(const Scenario& sc, std::uint64_t seed, const Output& out);

struct HdrRun {
  double event_bright = 0.0;
  double event_dark = 0.0;
  double required = 0.9;
  std::vector<double> exposures;
  std::vector<double> frame_bright;
  std::vector<double> frame_dark;
};
HdrRun run_hdr(const Scenario& sc, std::uint64_t seed, const Output& out);

}  // namespace evf::scenarios
