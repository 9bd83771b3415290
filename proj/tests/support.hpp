#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "evfield/plenoptic.hpp"
#include "evfield/textures.hpp"

namespace evf::test {

inline Image random_image(int w, int h, int channels, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(w, h, channels);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

/// One textured plane covering a w x h sensor with `margin` px to spare.
inline LayeredScene plane_scene(int w, int h, double depth, std::uint64_t seed = 1, int margin = 16,
                                double sigma = 1.0) {
  LayeredScene s;
  s.width = w;
  s.height = h;
  s.focus_distance = 3.0;
  s.disparity_constant = 8.0;
  s.background.texture = textures::noise(w + 2 * margin, h + 2 * margin, seed, 0.1, 1.0, sigma);
  s.background.depth = depth;
  s.background.position = {-static_cast<double>(margin), -static_cast<double>(margin)};
  return s;
}

/// Background plane plus a smaller square layer in front of it.
inline LayeredScene two_layer_scene(int w, int h, double back, double front, std::uint64_t seed = 1) {
  LayeredScene s = plane_scene(w, h, back, seed);
  SceneLayer l;
  l.texture = textures::noise(w / 2, h / 2, seed + 1, 0.2, 1.0, 0.7);
  l.alpha = textures::rect_alpha(w / 2, h / 2, 2, 2, w / 2 - 2, h / 2 - 2);
  l.depth = front;
  l.position = {w / 4.0, h / 4.0};
  s.layers.push_back(std::move(l));
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("evf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace evf::test
