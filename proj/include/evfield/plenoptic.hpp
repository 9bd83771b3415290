#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evfield/image.hpp"

namespace evf {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// A point on the virtual aperture, in aperture units.
struct ViewOffset {
  double s = 0.0;
  double t = 0.0;
  friend bool operator==(const ViewOffset&, const ViewOffset&) = default;
};

/// Fronto-parallel textured plane. `position` places texture pixel (0,0) in
/// sensor coordinates at time 0; the layer then translates with `velocity`
/// (px/s) and rotates with `angular_velocity` (rad/s) about
/// `rotation_center` (sensor coordinates at time 0, moving with the layer).
struct SceneLayer {
  Image texture;
  Grid<double> alpha;  // empty means opaque everywhere
  double depth = 1.0;
  Vec2 position;
  Vec2 velocity;
  double angular_velocity = 0.0;
  Vec2 rotation_center;

  void validate() const;
};

struct LayeredScene {
  std::vector<SceneLayer> layers;  // front to back
  SceneLayer background;
  double focus_distance = 1.0;      // d0
  double disparity_constant = 1.0;  // A, px * depth-units per aperture unit
  int width = 0;
  int height = 0;

  int channels() const noexcept { return background.texture.channels(); }
  void validate() const;
};

struct LightField {
  std::vector<ViewOffset> views;
  std::vector<Image> images;
  std::optional<double> timestamp;

  std::size_t size() const noexcept { return views.size(); }
  int width() const noexcept { return images.empty() ? 0 : images.front().width(); }
  int height() const noexcept { return images.empty() ? 0 : images.front().height(); }
  void validate() const;
};

/// Pixels of image shift per unit aperture offset for a plane at `layer_depth`
/// when the camera focuses at `d0`: A * (1/depth - 1/d0).
double layer_disparity(double layer_depth, double d0, double A);

/// Sensor-to-texture mapping of one layer for a given view and time.
struct LayerPose {
  double cos_a = 1.0;
  double sin_a = 0.0;
  bool rotated = false;
  Vec2 center;  // rotation center in sensor coordinates (already translated)
  Vec2 shift;   // total translation: motion + parallax - position

  static LayerPose make(const SceneLayer& layer, const LayeredScene& scene, ViewOffset view,
                        double time);
  // Texture coordinate seen at sensor pixel (x, y).
  Vec2 texture_coord(double x, double y) const noexcept {
    if (!rotated) return {x - shift.x, y - shift.y};
    const double dx = x - center.x;
    const double dy = y - center.y;
    // inverse rotation, then undo the translation
    const double rx = cos_a * dx + sin_a * dy + center.x;
    const double ry = -sin_a * dx + cos_a * dy + center.y;
    return {rx - shift.x, ry - shift.y};
  }
};

Image render_view(const LayeredScene& scene, ViewOffset view, double time);
namespace detail {
// render_view without re-validating the scene; callers validate once.
Image render_view_unchecked(const LayeredScene& scene, ViewOffset view, double time);
}  // namespace detail

LightField render_lightfield(const LayeredScene& scene, std::span<const ViewOffset> views,
                             double time);
Image integrate_aperture(const LightField& lf);

/// Box-downsample every texture by an integer factor and rescale geometry
/// (positions, velocities, A, sensor size) so the scene renders at 1/factor
/// resolution. Used to render tile-resolution views for spatial mosaics.
LayeredScene downscale_scene(const LayeredScene& scene, int factor);

/// nx*ny views on a regular aperture grid centred on the axis, row-major
/// over (j, i) so view index = j*nx + i.
std::vector<ViewOffset> grid_views(int nx, int ny, double pitch);

}  // namespace evf
