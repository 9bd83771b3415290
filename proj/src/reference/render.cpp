#include "evfield/reference.hpp"

namespace evf::reference {

namespace {

double sample_alpha(const Grid<double>& a, double x, double y) {
  if (a.empty()) return 1.0;
  Image view(a);
  return view.sample(x, y);
}

}  // namespace

Image render_view(const LayeredScene& scene, ViewOffset view, double time) {
  scene.validate();
  Image out(scene.width, scene.height, scene.channels());
  const int nc = out.channels();
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      double trans = 1.0;
      double acc[3] = {0.0, 0.0, 0.0};
      for (const SceneLayer& layer : scene.layers) {
        if (!(trans > 0.0)) break;
        const Vec2 p = LayerPose::make(layer, scene, view, time).texture_coord(x, y);
        const double a = sample_alpha(layer.alpha, p.x, p.y);
        if (a <= 0.0) continue;
        for (int c = 0; c < nc; ++c) acc[c] += trans * a * layer.texture.sample(p.x, p.y, c);
        trans *= 1.0 - a;
      }
      if (trans > 0.0) {
        const Vec2 p = LayerPose::make(scene.background, scene, view, time).texture_coord(x, y);
        for (int c = 0; c < nc; ++c) acc[c] += trans * scene.background.texture.sample(p.x, p.y, c);
      }
      for (int c = 0; c < nc; ++c) out.at(x, y, c) = acc[c];
    }
  }
  return out;
}

}  // namespace evf::reference
