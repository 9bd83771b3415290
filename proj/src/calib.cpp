#include "evfield/calib.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <string>

#include "evfield/error.hpp"

namespace evf {

double ShiftTrack::mean_score() const {
  if (shifts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& sh : shifts) s += sh.score;
  return s / static_cast<double>(shifts.size());
}

Image crop(const Image& img, const PatchRect& r) {
  if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > img.width() ||
      r.y + r.h > img.height())
    throw DomainError("crop: rectangle outside image");
  Image out(r.w, r.h, img.channels());
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(r.x + x, r.y + y, c);
  return out;
}

namespace {

constexpr double kNone = -std::numeric_limits<double>::infinity();

struct ZeroMeanPatch {
  Grid<double> values;  // patch minus its mean
  double norm = 0.0;    // sqrt of the sum of squares
};

ZeroMeanPatch prepare_patch(const Image& patch) {
  Grid<double> g = luminance(patch);
  double mean = 0.0;
  for (double v : g.data()) mean += v;
  mean /= static_cast<double>(g.size());
  double ss = 0.0;
  for (auto& v : g.storage()) {
    v -= mean;
    ss += v * v;
  }
  if (!(ss > 1e-20 * static_cast<double>(g.size())))
    throw DegenerateInput("match_template: patch has zero variance");
  return {std::move(g), std::sqrt(ss)};
}

double ncc_at(const ZeroMeanPatch& p, const Grid<double>& frame, int fx, int fy) {
  const int w = p.values.width(), h = p.values.height();
  if (fx < 0 || fy < 0 || fx + w > frame.width() || fy + h > frame.height()) return kNone;
  double sf = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) sf += frame(fx + x, fy + y);
  const double mean = sf / static_cast<double>(static_cast<std::size_t>(w) * h);
  double cross = 0.0, ss = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double f = frame(fx + x, fy + y) - mean;
      cross += p.values(x, y) * f;
      ss += f * f;
    }
  if (!(ss > 0.0)) return 0.0;
  return cross / (p.norm * std::sqrt(ss));
}

// 1D parabola vertex through (-1, a), (0, b), (1, c); 0 when not a maximum.
double vertex_1d(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

}  // namespace

TemplateMatch match_template(const Image& patch, int origin_x, int origin_y, const Image& frame,
                             int search_radius) {
  if (search_radius < 0) throw DomainError("match_template: negative search radius");
  const ZeroMeanPatch zp = prepare_patch(patch);
  const Grid<double> f = luminance(frame);
  const int side = 2 * search_radius + 1;
  Grid<double> score(side, side, kNone);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i)
      score(i, j) = ncc_at(zp, f, origin_x + i - search_radius, origin_y + j - search_radius);

  int bi = -1, bj = -1;
  double best = kNone;
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i)
      if (score(i, j) > best) {
        best = score(i, j);
        bi = i;
        bj = j;
      }
  if (bi < 0) throw DomainError("match_template: patch does not fit in the frame within the search window");

  TemplateMatch m{static_cast<double>(bi - search_radius), static_cast<double>(bj - search_radius),
                  best};
  if (best >= 1.0 - 1e-12) return m;  // exact copy: integer offset

  // neighbourhood, evaluated directly so peaks on the search border refine too
  double nb[3][3];
  bool full = true;
  for (int v = -1; v <= 1; ++v)
    for (int u = -1; u <= 1; ++u) {
      const int i = bi + u, j = bj + v;
      double s = (i >= 0 && j >= 0 && i < side && j < side)
                     ? score(i, j)
                     : ncc_at(zp, f, origin_x + i - search_radius, origin_y + j - search_radius);
      nb[v + 1][u + 1] = s;
      if (s == kNone) full = false;
    }

  double du = 0.0, dv = 0.0;
  bool done = false;
  if (full) {
    double sf = 0, su = 0, sv = 0, suv = 0, suu = 0, svv = 0;
    for (int v = -1; v <= 1; ++v)
      for (int u = -1; u <= 1; ++u) {
        const double z = nb[v + 1][u + 1];
        sf += z;
        su += u * z;
        sv += v * z;
        suv += u * v * z;
        suu += u * u * z;
        svv += v * v * z;
      }
    const double b = su / 6.0, c = sv / 6.0, e = suv / 4.0;
    const double sum2 = 0.5 * (suu + svv - 4.0 / 3.0 * sf);
    const double diff2 = 0.5 * (suu - svv);
    const double d = 0.5 * (sum2 + diff2), g = 0.5 * (sum2 - diff2);
    const double det = 4.0 * d * g - e * e;
    if (d < 0.0 && det > 0.0) {
      du = (-2.0 * g * b + e * c) / det;
      dv = (-2.0 * d * c + e * b) / det;
      done = std::abs(du) <= 1.0 && std::abs(dv) <= 1.0;
    }
  }
  if (!done) {
    du = (nb[1][0] == kNone || nb[1][2] == kNone) ? 0.0 : vertex_1d(nb[1][0], nb[1][1], nb[1][2]);
    dv = (nb[0][1] == kNone || nb[2][1] == kNone) ? 0.0 : vertex_1d(nb[0][1], nb[1][1], nb[2][1]);
  }
  m.dx += du;
  m.dy += dv;
  return m;
}

ShiftTrack track_patch(std::span<const Image> frames, std::size_t reference, const PatchRect& patch,
                       int search_radius) {
  if (reference >= frames.size()) throw DomainError("track_patch: reference frame out of range");
  const Image tmpl = crop(frames[reference], patch);
  ShiftTrack track{patch, {}};
  track.shifts.resize(frames.size());
  const auto n = static_cast<std::ptrdiff_t>(frames.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      const TemplateMatch m = match_template(tmpl, patch.x, patch.y, frames[k], search_radius);
      track.shifts[k] = {static_cast<std::size_t>(k), m.dx, m.dy, m.score};
    } catch (...) {
#pragma omp critical(evf_track_patch)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return track;
}

CircleFit fit_circle(std::span<const Point2> points) {
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateInput("fit_circle: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double suu = 0, svv = 0, suv = 0, suz = 0, svz = 0, sz = 0;
  for (const auto& p : points) {
    const double u = p.x - mx, v = p.y - my, z = u * u + v * v;
    suu += u * u;
    svv += v * v;
    suv += u * v;
    suz += u * z;
    svz += v * z;
    sz += z;
  }
  const double det = suu * svv - suv * suv;
  const double scale = suu + svv;
  if (!(scale > 0.0) || !(det > 1e-12 * scale * scale))
    throw DegenerateInput("fit_circle: points are collinear or coincident");
  // centred normal equations: [suu suv; suv svv] [D E]^T = -[suz svz]^T, F = -sz/n
  const double D = -(svv * suz - suv * svz) / det;
  const double E = -(suu * svz - suv * suz) / det;
  const double F = -sz / static_cast<double>(n);
  CircleFit fit;
  fit.center = {mx - 0.5 * D, my - 0.5 * E};
  fit.radius = std::sqrt(std::max(0.0, 0.25 * (D * D + E * E) - F));
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = std::hypot(p.x - fit.center.x, p.y - fit.center.y) - fit.radius;
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

ViewAssignment assign_views(const ShiftTrack& track, const CircleFit& fit, double scan_frequency,
                            std::span<const double> frame_times, double max_residual) {
  if (!(scan_frequency > 0.0)) throw DegenerateInput("assign_views: scan frequency must be positive");
  if (track.shifts.empty()) throw DegenerateInput("assign_views: empty shift track");
  if (!(fit.radius > 0.0)) throw DegenerateInput("assign_views: circle radius is zero");
  if (fit.rms_residual > max_residual)
    throw CalibrationFailure("assign_views: circle fit residual " + std::to_string(fit.rms_residual) +
                             " px exceeds " + std::to_string(max_residual));
  auto angle = [&](double t) {
    double cycles = scan_frequency * t;
    cycles -= std::floor(cycles);
    return 2.0 * std::numbers::pi * cycles;
  };
  double p = 0.0, q = 0.0;
  for (const Shift& s : track.shifts) {
    if (s.frame >= frame_times.size()) throw DomainError("assign_views: shift refers to a missing frame");
    const double a = angle(frame_times[s.frame]);
    const double u = s.dx - fit.center.x, v = s.dy - fit.center.y;
    p += u * std::sin(a) + v * std::cos(a);
    q += u * std::cos(a) - v * std::sin(a);
  }
  ViewAssignment out;
  double phi = std::atan2(q, p);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  out.phase_offset = phi;
  out.views.reserve(frame_times.size());
  for (double t : frame_times) {
    const double a = angle(t) + phi;
    out.views.push_back({fit.radius * std::sin(a), fit.radius * std::cos(a)});
  }
  return out;
}

DepthFit fit_depth_disparity(std::span<const DisparityDepth> pairs) {
  if (pairs.size() < 2) throw DegenerateInput("fit_depth_disparity: need at least 2 points");
  const auto n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  DepthFit fit;
  fit.disparity_min = std::numeric_limits<double>::infinity();
  fit.disparity_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    mx += p.disparity;
    my += p.depth;
    fit.disparity_min = std::min(fit.disparity_min, p.disparity);
    fit.disparity_max = std::max(fit.disparity_max, p.disparity);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    sxx += (p.disparity - mx) * (p.disparity - mx);
    sxy += (p.disparity - mx) * (p.depth - my);
  }
  if (!(sxx > 0.0)) throw DegenerateInput("fit_depth_disparity: all disparities are equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& p : pairs) {
    const double r = p.depth - (fit.slope * p.disparity + fit.intercept);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

}  // namespace evf
