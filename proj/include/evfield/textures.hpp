#pragma once

#include <cstdint>

#include "evfield/image.hpp"

namespace evf::textures {

/// Uniform noise, Gaussian-blurred with `sigma` (0 = none), rescaled to [low, high].
Image noise(int width, int height, std::uint64_t seed, double low, double high, double sigma);

/// Random constant-valued square cells of `cell` px in [low, high].
Image blocks(int width, int height, std::uint64_t seed, int cell, double low, double high);

/// Dark lines on a bright ground: value(x, y) = h(y) * v(x), where h and v
/// are `line` on the lines and 1 elsewhere, scaled by `bright`. Separable
/// in log space, so a horizontal translation leaves row structure untouched.
Image grid(int width, int height, int period, int line_width, double line, double bright);

Image constant(int width, int height, double value);

Grid<double> rect_alpha(int width, int height, int x0, int y0, int x1, int y1);
Grid<double> disk_alpha(int width, int height, double cx, double cy, double radius);

}  // namespace evf::textures
