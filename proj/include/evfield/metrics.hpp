#pragma once

// Image-quality measures used by the comparison scenarios. All region
// measures take a mask; pixels with mask == 0 are ignored.

#include <cstdint>

#include "evfield/image.hpp"
#include "evfield/lfops.hpp"
#include "evfield/plenoptic.hpp"

namespace evf::metrics {

using Mask = Grid<std::uint8_t>;

Mask rect_mask(int width, int height, int x0, int y0, int x1, int y1);
/// Shrinks the mask by r pixels (square structuring element).
Mask erode(const Mask& m, int r);
Mask intersect(const Mask& a, const Mask& b);
std::size_t count(const Mask& m);

/// Where layer `index` is visible with coverage >= `min_coverage`
/// (-1 selects the background). Rendered with indicator textures.
Mask layer_mask(const LayeredScene& scene, int index, ViewOffset view, double time,
                double min_coverage = 0.99);

/// 4-neighbour Laplacian with edge clamp.
Grid<double> laplacian(const Grid<double>& g);

/// Mean squared Laplacian over the mask.
double laplacian_energy(const Grid<double>& g, const Mask& m);

/// Mean of the windowed Laplacian variance over the mask.
double mean_sharpness(const Grid<double>& g, const Mask& m, int window = 7);

struct OrientedEnergy {
  double horizontal = 0.0;  // squared vertical gradient: horizontal edges
  double vertical = 0.0;    // squared horizontal gradient: vertical edges
  double ratio() const { return vertical > 0.0 ? horizontal / vertical : 0.0; }
};
/// Summed squared Sobel responses over the mask.
OrientedEnergy sobel_energy(const Grid<double>& g, const Mask& m);

/// <L(r), L(truth)> / ||L(truth)|| over the mask: the part of the
/// reconstruction's fine detail that is shared with the truth. Noise and
/// misplaced detail do not add to it.
double projected_detail(const Grid<double>& recon, const Grid<double>& truth, const Mask& m);

/// Standard deviation over a window x window neighbourhood (clipped).
Grid<double> local_std(const Grid<double>& g, int window);

/// Fraction of masked pixels whose local standard deviation exceeds `threshold`.
double contrast_fraction(const Grid<double>& g, const Mask& m, int window, double threshold);

}  // namespace evf::metrics
