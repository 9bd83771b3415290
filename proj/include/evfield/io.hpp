#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evfield/calib.hpp"
#include "evfield/lfops.hpp"
#include "evfield/optics.hpp"
#include "evfield/plenoptic.hpp"
#include "evfield/sensor.hpp"

#include "json.hpp"

namespace evf::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- images ---------------------------------------------------------------

/// Raw binary PNM samples: P5 (1 channel) or P6 (3 channels), maxval < 65536.
/// 16-bit samples are big-endian on disk.
struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
  friend bool operator==(const PnmImage&, const PnmImage&) = default;
};

PnmImage read_pnm(const fs::path& path);
void write_pnm(const fs::path& path, const PnmImage& img);

/// Samples divided by maxval.
Image to_image(const PnmImage& pnm);
/// round(clamp(v, 0, 1) * maxval).
PnmImage quantize(const Image& img, int maxval);

Image read_image(const fs::path& path);
void write_image(const fs::path& path, const Image& img, int maxval = 65535);

/// 16-bit PGM/PPM holding (v - min) / (max - min), plus a `<path>.json`
/// sidecar with min and max so values come back to 16-bit precision.
void write_normalized(const fs::path& path, const Image& img);
Image read_normalized(const fs::path& path);

// ---- events ---------------------------------------------------------------

enum class EventFormat { text, binary };

/// Format from the extension: ".evf2"/".bin" binary, anything else text.
EventFormat format_for(const fs::path& path);

/// Provenance (scan curve, mosaic layout, span) goes to `<path>.meta.json`.
void write_events(const fs::path& path, const EventStream& stream, EventFormat format);
void write_events(const fs::path& path, const EventStream& stream);
/// Detects the format from the file's first bytes.
EventStream read_events(const fs::path& path);

// ---- structured documents -------------------------------------------------

json to_json(const ScanCurve& c);
ScanCurve scan_curve_from_json(const json& j);
json to_json(const MosaicLayout& l);
MosaicLayout mosaic_layout_from_json(const json& j);
json to_json(const ViewOffset& v);

/// Scene document; texture paths resolve against `base_dir`.
LayeredScene scene_from_json(const json& j, const fs::path& base_dir);
LayeredScene read_scene(const fs::path& path);
json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

/// Directory holding index.json and one normalized 16-bit PGM per view.
void write_lightfield(const fs::path& dir, const LightField& lf);
LightField read_lightfield(const fs::path& dir);

/// Focal stack as numbered normalized PGMs plus index.json.
void write_focal_stack(const fs::path& dir, const FocalStack& stack);

/// `<base>.evd`: text header then little-endian float32 depth samples;
/// `<base>.ppm`: 8-bit colour-mapped preview.
void write_depthmap(const fs::path& base, const DepthMap& map, const std::string& units);
DepthMap read_depthmap(const fs::path& evd_path);

json to_json(const CalibrationResult& r);
CalibrationResult calibration_from_json(const json& j);

struct Metric {
  std::string name;
  double value = 0.0;
  std::string tolerance;
  bool pass = true;
};
void write_metrics_csv(const fs::path& path, const std::vector<Metric>& metrics);

}  // namespace evf::io
