#include "evfield/plenoptic.hpp"

#include <cmath>
#include <string>

namespace evf {

void SceneLayer::validate() const {
  if (texture.empty()) throw DomainError("layer texture is empty");
  if (!alpha.empty() &&
      (alpha.width() != texture.width() || alpha.height() != texture.height()))
    throw DomainError("layer alpha and texture dimensions differ");
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw DomainError("layer depth must be positive, got " + std::to_string(depth));
  for (double v : texture.data())
    if (!std::isfinite(v) || v < 0.0) throw DomainError("layer radiance must be finite and >= 0");
  for (double a : alpha.data())
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("layer alpha must lie in [0,1]");
}

void LayeredScene::validate() const {
  if (width <= 0 || height <= 0) throw DomainError("scene sensor size must be positive");
  if (!(focus_distance > 0.0)) throw DomainError("focus distance must be positive");
  if (!std::isfinite(disparity_constant)) throw DomainError("disparity constant must be finite");
  background.validate();
  for (double a : background.alpha.data())
    if (a != 1.0) throw DomainError("background alpha must be 1 everywhere");
  for (const auto& layer : layers) {
    layer.validate();
    if (layer.texture.channels() != background.texture.channels())
      throw DomainError("all layers must share a channel count");
  }
}

void LightField::validate() const {
  if (views.size() != images.size()) throw DomainError("light field view/image count mismatch");
  for (const auto& img : images)
    if (!img.same_shape(images.front())) throw DomainError("light field views differ in shape");
}

double layer_disparity(double layer_depth, double d0, double A) {
  if (!(layer_depth > 0.0)) throw DomainError("layer_disparity: depth must be positive");
  if (!(d0 > 0.0)) throw DomainError("layer_disparity: focus distance must be positive");
  if (layer_depth == d0) return 0.0;
  return A * (1.0 / layer_depth - 1.0 / d0);
}

LayerPose LayerPose::make(const SceneLayer& layer, const LayeredScene& scene, ViewOffset view,
                          double time) {
  LayerPose pose;
  const double delta = layer_disparity(layer.depth, scene.focus_distance, scene.disparity_constant);
  const Vec2 motion{layer.velocity.x * time + delta * view.s,
                    layer.velocity.y * time + delta * view.t};
  pose.shift = {motion.x + layer.position.x, motion.y + layer.position.y};
  const double angle = layer.angular_velocity * time;
  if (angle != 0.0) {
    pose.rotated = true;
    pose.cos_a = std::cos(angle);
    pose.sin_a = std::sin(angle);
    pose.center = {layer.rotation_center.x + motion.x, layer.rotation_center.y + motion.y};
  }
  return pose;
}

namespace {

void render_row(const LayeredScene& scene, std::span<const LayerPose> poses,
                const LayerPose& bg_pose, int y, Image& out) {
  const int nc = out.channels();
  const std::size_t nl = scene.layers.size();
  for (int x = 0; x < scene.width; ++x) {
    double acc[3] = {0.0, 0.0, 0.0};
    double trans = 1.0;
    for (std::size_t l = 0; l < nl && trans > 0.0; ++l) {
      const SceneLayer& layer = scene.layers[l];
      const Vec2 p = poses[l].texture_coord(x, y);
      double a = 1.0;
      if (!layer.alpha.empty()) {
        // alpha shares the texture sampler through a one-channel view
        const double cx = std::clamp(p.x, 0.0, static_cast<double>(layer.alpha.width() - 1));
        const double cy = std::clamp(p.y, 0.0, static_cast<double>(layer.alpha.height() - 1));
        const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy);
        const int x1 = std::min(x0 + 1, layer.alpha.width() - 1);
        const int y1 = std::min(y0 + 1, layer.alpha.height() - 1);
        const double fx = cx - x0, fy = cy - y0;
        const auto& al = layer.alpha;
        const double top = fx == 0.0 ? al(x0, y0) : (1.0 - fx) * al(x0, y0) + fx * al(x1, y0);
        const double bot = fx == 0.0 ? al(x0, y1) : (1.0 - fx) * al(x0, y1) + fx * al(x1, y1);
        a = fy == 0.0 ? top : (1.0 - fy) * top + fy * bot;
      }
      if (a <= 0.0) continue;
      for (int c = 0; c < nc; ++c) acc[c] += trans * a * layer.texture.sample(p.x, p.y, c);
      trans *= 1.0 - a;
    }
    if (trans > 0.0) {
      const Vec2 p = bg_pose.texture_coord(x, y);
      for (int c = 0; c < nc; ++c) acc[c] += trans * scene.background.texture.sample(p.x, p.y, c);
    }
    for (int c = 0; c < nc; ++c) out.at(x, y, c) = acc[c];
  }
}

}  // namespace

Image render_view(const LayeredScene& scene, ViewOffset view, double time) {
  scene.validate();
  return detail::render_view_unchecked(scene, view, time);
}

Image detail::render_view_unchecked(const LayeredScene& scene, ViewOffset view, double time) {
  std::vector<LayerPose> poses;
  poses.reserve(scene.layers.size());
  for (const auto& layer : scene.layers) poses.push_back(LayerPose::make(layer, scene, view, time));
  const LayerPose bg_pose = LayerPose::make(scene.background, scene, view, time);

  Image out(scene.width, scene.height, scene.channels());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < scene.height; ++y) render_row(scene, poses, bg_pose, y, out);
  return out;
}

LightField render_lightfield(const LayeredScene& scene, std::span<const ViewOffset> views,
                             double time) {
  if (views.empty()) throw DomainError("render_lightfield: empty view list");
  LightField lf;
  lf.views.assign(views.begin(), views.end());
  lf.images.resize(views.size());
  lf.timestamp = time;
  scene.validate();
  for (std::size_t i = 0; i < views.size(); ++i)
    lf.images[i] = detail::render_view_unchecked(scene, views[i], time);
  return lf;
}

Image integrate_aperture(const LightField& lf) {
  if (lf.size() == 0) throw DomainError("integrate_aperture: empty light field");
  lf.validate();
  if (lf.size() == 1) return lf.images.front();
  const Image& first = lf.images.front();
  Image out(first.width(), first.height(), first.channels());
  auto dst = out.data();
  const double inv = 1.0 / static_cast<double>(lf.size());
  const auto n = static_cast<std::ptrdiff_t>(dst.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& img : lf.images) s += img.data()[i];
    dst[i] = s * inv;
  }
  return out;
}

namespace {

Image box_down(const Image& img, int f) {
  const int w = img.width() / f, h = img.height() / f, nc = img.channels();
  Image out(w, h, nc);
  const double inv = 1.0 / (f * f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int j = 0; j < f; ++j)
          for (int i = 0; i < f; ++i) s += img.at(x * f + i, y * f + j, c);
        out.at(x, y, c) = s * inv;
      }
  return out;
}

SceneLayer downscale_layer(const SceneLayer& layer, int f) {
  if (layer.texture.width() % f != 0 || layer.texture.height() % f != 0)
    throw DomainError("downscale_scene: texture size not divisible by factor");
  SceneLayer out = layer;
  out.texture = box_down(layer.texture, f);
  if (!layer.alpha.empty()) {
    Image a = box_down(Image(layer.alpha), f);
    out.alpha = Grid<double>(a.width(), a.height());
    std::copy(a.data().begin(), a.data().end(), out.alpha.data().begin());
  }
  const double inv = 1.0 / f;
  // coarse pixel X is centred on fine coordinate X*f + (f-1)/2
  out.position = {layer.position.x * inv, layer.position.y * inv};
  out.velocity = {layer.velocity.x * inv, layer.velocity.y * inv};
  out.rotation_center = {(layer.rotation_center.x + 0.5) * inv - 0.5,
                         (layer.rotation_center.y + 0.5) * inv - 0.5};
  return out;
}

}  // namespace

LayeredScene downscale_scene(const LayeredScene& scene, int factor) {
  if (factor < 1) throw DomainError("downscale_scene: factor must be >= 1");
  if (factor == 1) return scene;
  if (scene.width % factor != 0 || scene.height % factor != 0)
    throw DomainError("downscale_scene: sensor size not divisible by factor");
  LayeredScene out = scene;
  out.width = scene.width / factor;
  out.height = scene.height / factor;
  out.disparity_constant = scene.disparity_constant / factor;
  out.background = downscale_layer(scene.background, factor);
  for (auto& layer : out.layers) layer = downscale_layer(layer, factor);
  return out;
}

std::vector<ViewOffset> grid_views(int nx, int ny, double pitch) {
  if (nx < 1 || ny < 1) throw DomainError("grid_views: counts must be positive");
  std::vector<ViewOffset> views;
  views.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      views.push_back({(i - 0.5 * (nx - 1)) * pitch, (j - 0.5 * (ny - 1)) * pitch});
  return views;
}

}  // namespace evf
