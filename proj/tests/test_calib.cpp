#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "evfield/calib.hpp"
#include "evfield/textures.hpp"
#include "support.hpp"

using namespace evf;

namespace {

Image shifted(const Image& src, double dx, double dy) {
  Image out(src.width(), src.height(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) out.at(x, y) = src.sample(x - dx, y - dy);
  return out;
}

// NCC of `patch` against frame content sampled at a fractional offset.
double ncc_fractional(const Image& patch, int ox, int oy, const Image& frame, double dx, double dy) {
  const int w = patch.width(), h = patch.height();
  double mp = 0, mf = 0;
  std::vector<double> f(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f[y * w + x] = frame.sample(ox + x + dx, oy + y + dy);
      mf += f[y * w + x];
      mp += patch.at(x, y);
    }
  mp /= w * h;
  mf /= w * h;
  double sp = 0, sf = 0, spf = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = patch.at(x, y) - mp, b = f[y * w + x] - mf;
      sp += a * a;
      sf += b * b;
      spf += a * b;
    }
  return spf / std::sqrt(sp * sf);
}

std::vector<Point2> circle_points(Point2 c, double r, int n, double phase = 0.0) {
  std::vector<Point2> p;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / n;
    p.push_back({c.x + r * std::sin(a), c.y + r * std::cos(a)});
  }
  return p;
}

}  // namespace

TEST_CASE("match_template") {
  const Image tex = textures::noise(96, 96, 77, 0.1, 1.0, 1.5);
  const PatchRect rect{32, 32, 32, 32};
  const Image patch = crop(tex, rect);
  SUBCASE("self match") {
    const TemplateMatch m = match_template(patch, 32, 32, tex, 5);
    CHECK(m.dx == 0.0);
    CHECK(m.dy == 0.0);
    CHECK(m.score == doctest::Approx(1.0));
  }
  SUBCASE("integer shift") {
    const TemplateMatch m = match_template(patch, 32, 32, shifted(tex, 3, -2), 6);
    CHECK(m.dx == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(m.dy == doctest::Approx(-2.0).epsilon(1e-9));
  }
  SUBCASE("half-pixel shift against an upsampled NCC search") {
    const Image frame = shifted(tex, 0.5, 0.0);
    const TemplateMatch m = match_template(patch, 32, 32, frame, 4);
    double best = -2.0, bx = 0.0, by = 0.0;
    for (int j = -10; j <= 10; ++j)
      for (int i = -10; i <= 20; ++i) {
        const double s = ncc_fractional(patch, 32, 32, frame, i * 0.1, j * 0.1);
        if (s > best) {
          best = s;
          bx = i * 0.1;
          by = j * 0.1;
        }
      }
    CHECK(std::abs(m.dx - bx) <= 0.1);
    CHECK(std::abs(m.dy - by) <= 0.1);
  }
  SUBCASE("a translated reference moves the answer by the same amount") {
    const Image frame = shifted(tex, 1.3, 0.6);
    const TemplateMatch a = match_template(patch, 32, 32, frame, 5);
    const Image patch2 = crop(tex, {36, 30, 32, 32});
    const TemplateMatch b = match_template(patch2, 36, 30, frame, 5);
    CHECK(std::abs(a.dx - b.dx) < 0.05);
    CHECK(std::abs(a.dy - b.dy) < 0.05);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(match_template(Image(8, 8, 1, 0.5), 0, 0, tex, 3), DegenerateInput);
    CHECK_THROWS_AS(match_template(patch, 32, 32, tex, -1), DomainError);
    CHECK_THROWS_AS(crop(tex, {90, 90, 10, 10}), DomainError);
  }
}

TEST_CASE("track_patch") {
  const Image tex = textures::noise(80, 80, 5, 0.1, 1.0, 1.2);
  std::vector<Image> frames{tex, shifted(tex, 2, 1), shifted(tex, -1, 3)};
  const ShiftTrack tr = track_patch(frames, 0, {24, 24, 32, 32}, 5);
  REQUIRE(tr.shifts.size() == 3);
  CHECK(tr.shifts[1].dx == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(tr.shifts[2].dy == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(tr.mean_score() > 0.99);
  CHECK_THROWS_AS(track_patch(frames, 3, {24, 24, 32, 32}, 5), DomainError);
}

TEST_CASE("fit_circle") {
  SUBCASE("exact points") {
    const auto p = circle_points({3.0, -2.0}, 4.5, 17, 0.3);
    const CircleFit f = fit_circle(p);
    CHECK(f.center.x == doctest::Approx(3.0));
    CHECK(f.center.y == doctest::Approx(-2.0));
    CHECK(f.radius == doctest::Approx(4.5));
    CHECK(f.rms_residual < 1e-9);
  }
  SUBCASE("three points define their circumcircle") {
    const std::vector<Point2> p{{1, 0}, {-1, 0}, {0, 1}};
    const CircleFit f = fit_circle(p);
    CHECK(std::abs(f.center.x) < 1e-12);
    CHECK(std::abs(f.center.y) < 1e-12);
    CHECK(f.radius == doctest::Approx(1.0));
  }
  SUBCASE("noisy points: 95th percentile radius error") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> err;
    for (int trial = 0; trial < 400; ++trial) {
      auto p = circle_points({0.0, 0.0}, 6.0, 40);
      for (auto& q : p) {
        q.x += noise(rng);
        q.y += noise(rng);
      }
      err.push_back(std::abs(fit_circle(p).radius - 6.0));
    }
    std::sort(err.begin(), err.end());
    CHECK(err[static_cast<std::size_t>(0.95 * err.size())] < 0.1);
  }
  SUBCASE("degenerate") {
    CHECK_THROWS_AS(fit_circle(std::vector<Point2>{{0, 0}, {1, 1}}), DegenerateInput);
    CHECK_THROWS_AS(fit_circle(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), DegenerateInput);
    CHECK_THROWS_AS(fit_circle(std::vector<Point2>(5, Point2{1, 1})), DegenerateInput);
  }
}

TEST_CASE("assign_views") {
  const double f = 250.0, phase = 1.234, r = 4.0;
  const Point2 c{0.5, -0.25};
  std::vector<double> times;
  ShiftTrack tr;
  for (int k = 0; k < 40; ++k) {
    const double t = (k + 0.5) * 1e-4;
    times.push_back(t);
    const double a = 2.0 * std::numbers::pi * f * t + phase;
    tr.shifts.push_back({static_cast<std::size_t>(k), c.x + r * std::sin(a), c.y + r * std::cos(a), 1.0});
  }
  std::vector<Point2> pts;
  for (const auto& s : tr.shifts) pts.push_back({s.dx, s.dy});
  const CircleFit fit = fit_circle(pts);

  const ViewAssignment va = assign_views(tr, fit, f, times);
  // brute-force oracle over the phase
  double best_phi = 0.0, best_cost = 1e300;
  for (int i = 0; i < 36000; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / 36000;
    double cost = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double a = 2.0 * std::numbers::pi * f * times[k] + phi;
      cost += std::pow(tr.shifts[k].dx - c.x - r * std::sin(a), 2) + std::pow(tr.shifts[k].dy - c.y - r * std::cos(a), 2);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_phi = phi;
    }
  }
  CHECK(std::abs(va.phase_offset - best_phi) < 0.02);
  CHECK(va.phase_offset == doctest::Approx(phase).epsilon(1e-6));
  REQUIRE(va.views.size() == 40);
  CHECK(va.views[0].s == doctest::Approx(tr.shifts[0].dx - c.x).epsilon(1e-6));

  CHECK_THROWS_AS(assign_views(tr, fit, 0.0, times), DegenerateInput);
  CircleFit noisy = fit;
  noisy.rms_residual = 0.8;
  CHECK_THROWS_AS(assign_views(tr, noisy, f, times, 0.5), CalibrationFailure);
  CHECK_THROWS_AS(assign_views(ShiftTrack{}, fit, f, times), DegenerateInput);
}

TEST_CASE("fit_depth_disparity") {
  SUBCASE("exact line") {
    std::vector<DisparityDepth> p;
    for (double d : {1.0, 2.5, 4.0, 7.0}) p.push_back({d, -10.0 * d + 110.0});
    const DepthFit fit = fit_depth_disparity(p);
    CHECK(fit.slope == doctest::Approx(-10.0));
    CHECK(fit.intercept == doctest::Approx(110.0));
    CHECK(fit.residual_rms < 1e-9);
    CHECK(fit.disparity_min == 1.0);
    CHECK(fit.disparity_max == 7.0);
  }
  SUBCASE("two points") {
    const std::vector<DisparityDepth> p{{0.0, 1.0}, {2.0, 5.0}};
    const DepthFit fit = fit_depth_disparity(p);
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
  }
  SUBCASE("order does not matter") {
    std::vector<DisparityDepth> p{{1.0, 3.0}, {2.0, 2.2}, {4.0, 0.1}, {5.5, -0.4}, {3.0, 1.9}};
    const DepthFit a = fit_depth_disparity(p);
    std::reverse(p.begin(), p.end());
    std::swap(p[1], p[3]);
    const DepthFit b = fit_depth_disparity(p);
    CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-12));
    CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-12));
  }
  SUBCASE("degenerate") {
    CHECK_THROWS_AS(fit_depth_disparity(std::vector<DisparityDepth>{{1.0, 2.0}}), DegenerateInput);
    CHECK_THROWS_AS(fit_depth_disparity(std::vector<DisparityDepth>{{1.0, 2.0}, {1.0, 3.0}}), DegenerateInput);
  }
}
