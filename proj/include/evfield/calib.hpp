#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evfield/lfops.hpp"
#include "evfield/plenoptic.hpp"

namespace evf {

struct PatchRect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct Shift {
  std::size_t frame = 0;
  double dx = 0.0;
  double dy = 0.0;
  double score = 0.0;  // NCC at the integer peak, in [-1, 1]
};

struct ShiftTrack {
  PatchRect reference_patch;
  std::vector<Shift> shifts;
  double mean_score() const;
};

struct TemplateMatch {
  double dx = 0.0;
  double dy = 0.0;
  double score = 0.0;
};

/// Zero-mean NCC search of `patch` (cut from pixel `origin` of some
/// reference) over integer offsets |dx|, |dy| <= search_radius in `frame`,
/// refined to sub-pixel with a quadratic fit on the 3x3 peak neighbourhood.
TemplateMatch match_template(const Image& patch, int origin_x, int origin_y, const Image& frame,
                             int search_radius);

Image crop(const Image& img, const PatchRect& rect);

/// Matches the reference patch of frames[reference] against every frame.
ShiftTrack track_patch(std::span<const Image> frames, std::size_t reference, const PatchRect& patch,
                       int search_radius);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct CircleFit {
  Point2 center;
  double radius = 0.0;
  double rms_residual = 0.0;
};

/// Algebraic (Kasa) least-squares circle.
CircleFit fit_circle(std::span<const Point2> points);

struct ViewAssignment {
  double phase_offset = 0.0;  // rad, in [0, 2 pi)
  std::vector<ViewOffset> views;  // shift-space (pixels), one per frame
};

/// Phase that best places the measured shifts on the fitted circle at angles
/// 2 pi f t_k + phase, with points center + r (sin, cos)(angle). Views are the
/// circle points relative to the centre.
ViewAssignment assign_views(const ShiftTrack& track, const CircleFit& fit, double scan_frequency,
                            std::span<const double> frame_times, double max_residual = 0.5);

struct CalibrationResult {
  Point2 circle_center;
  double radius = 0.0;
  double phase_offset = 0.0;
  double rms_residual = 0.0;
  std::vector<ViewOffset> per_frame_views;
  std::optional<DepthFit> depth_fit;
};

struct DisparityDepth {
  double disparity = 0.0;
  double depth = 0.0;
};

/// OLS of depth on disparity; the fit remembers the calibrated disparity range.
DepthFit fit_depth_disparity(std::span<const DisparityDepth> pairs);

}  // namespace evf
