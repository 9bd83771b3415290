#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "evfield/plenoptic.hpp"

namespace evf {

struct FocalSlice {
  double depth = 0.0;
  Image image;
};

struct FocalStack {
  std::vector<FocalSlice> slices;  // strictly increasing depth
  void validate() const;
};

struct DepthMap {
  static constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();
  Grid<double> depth;       // kInvalid where no focus peak passed the contrast gate
  Grid<double> confidence;  // 1 - second_best / best, 0 where invalid
  Grid<std::int32_t> slice; // argmax slice index, -1 where invalid
};

/// Shift-and-add: each view (s, t) is sampled at x + shift*(s, t) and the
/// views are averaged. shift == 0 takes the integrate_aperture path.
Image refocus_shift(const LightField& lf, double shift);

/// Refocus at depth d for a camera focused at d0 with disparity constant A.
Image refocus(const LightField& lf, double d, double d0, double A);

FocalStack focal_stack(const LightField& lf, std::span<const double> depths, double d0, double A);

/// Variance of the 3x3 Laplacian over a window x window neighbourhood
/// (clipped at the image border). Multi-channel input uses the channel mean.
Grid<double> sharpness(const Image& img, int window = 7);

/// Per pixel: slice of maximal sharpness (smallest depth on ties), refined
/// by a parabola through the peak and its neighbours in log-depth.
DepthMap depth_from_focus(const FocalStack& stack, double min_contrast, int window = 7);

struct DepthFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  double disparity_min = -std::numeric_limits<double>::infinity();
  double disparity_max = std::numeric_limits<double>::infinity();
};

struct DepthEstimate {
  double depth = 0.0;
  bool in_range = true;  // false when extrapolating outside the calibrated disparities
};

DepthEstimate disparity_to_depth(double disparity, const DepthFit& fit);

}  // namespace evf
