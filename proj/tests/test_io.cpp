#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "evfield/io.hpp"
#include "support.hpp"

using namespace evf;
namespace fs = std::filesystem;

namespace {

void put(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string get(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EventStream random_stream(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> x(0, 639), y(0, 479), dt(0, 2), pol(0, 1);
  EventStream s;
  s.width = 640;
  s.height = 480;
  s.threshold = 0.15f;
  std::int64_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += dt(rng);
    s.events.push_back({t, static_cast<std::uint16_t>(x(rng)), static_cast<std::uint16_t>(y(rng)),
                        static_cast<std::int8_t>(pol(rng) ? 1 : -1)});
  }
  std::sort(s.events.begin(), s.events.end(), event_before);
  // drop same-pixel same-time duplicates
  std::vector<Event> kept;
  for (const Event& e : s.events)
    if (kept.empty() || !(kept.back().t == e.t && kept.back().x == e.x && kept.back().y == e.y)) kept.push_back(e);
  s.events = std::move(kept);
  return s;
}

template <class F>
std::size_t parse_offset(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.offset();
  }
  FAIL("no ParseError");
  return 0;
}

}  // namespace

TEST_CASE("pnm round trips") {
  test::TempDir dir;
  SUBCASE("1x1 8-bit") {
    const io::PnmImage p{1, 1, 1, 255, {200}};
    io::write_pnm(dir / "a.pgm", p);
    CHECK(get(dir / "a.pgm") == std::string("P5\n1 1\n255\n") + '\xC8');
    CHECK(io::read_pnm(dir / "a.pgm") == p);
  }
  SUBCASE("16-bit gradient, big-endian") {
    io::PnmImage p{256, 2, 1, 65535, {}};
    for (int i = 0; i < 512; ++i) p.samples.push_back(static_cast<std::uint16_t>(i * 128));
    io::write_pnm(dir / "g.pgm", p);
    const std::string raw = get(dir / "g.pgm");
    const std::size_t data = raw.size() - 1024;
    CHECK(static_cast<unsigned char>(raw[data + 2]) == 0x00);
    CHECK(static_cast<unsigned char>(raw[data + 3]) == 0x80);
    CHECK(io::read_pnm(dir / "g.pgm") == p);
  }
  SUBCASE("colour and comments") {
    put(dir / "c.ppm", std::string("P6\n# made by hand\n2 1 # trailing\n255\n") + "\x01\x02\x03\x04\x05\x06");
    const io::PnmImage p = io::read_pnm(dir / "c.ppm");
    CHECK(p.channels == 3);
    CHECK(p.samples == std::vector<std::uint16_t>{1, 2, 3, 4, 5, 6});
  }
  SUBCASE("image values") {
    std::mt19937_64 rng(1);
    const Image img = test::random_image(13, 9, 3, rng);
    io::write_image(dir / "i.ppm", img);
    const Image back = io::read_image(dir / "i.ppm");
    for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5 / 65535 + 1e-12);
  }
  SUBCASE("normalized images keep their range") {
    std::mt19937_64 rng(2);
    const Image img = test::random_image(10, 10, 1, rng, -3.0, 7.0);
    io::write_normalized(dir / "n.pgm", img);
    const Image back = io::read_normalized(dir / "n.pgm");
    for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) <= 10.0 / 65535);
  }
}

TEST_CASE("pnm errors") {
  test::TempDir dir;
  put(dir / "m.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(io::read_pnm(dir / "m.pgm"), ParseError);
  put(dir / "t.pgm", "P5\n4 4\n255\n\x01\x02");
  CHECK_THROWS_AS(io::read_pnm(dir / "t.pgm"), ParseError);
  put(dir / "x.pgm", "P5\n1 1\n70000\n\x01\x02");
  CHECK_THROWS_AS(io::read_pnm(dir / "x.pgm"), ParseError);
  put(dir / "v.pgm", std::string("P5\n1 1\n100\n") + '\xC8');
  CHECK_THROWS_AS(io::read_pnm(dir / "v.pgm"), ParseError);
  CHECK_THROWS_AS(io::read_pnm(dir / "missing.pgm"), DomainError);
}

TEST_CASE("event files") {
  test::TempDir dir;
  SUBCASE("empty stream in both formats") {
    EventStream s;
    s.width = 3;
    s.height = 2;
    for (const char* name : {"e.evf2", "e.evt"}) {
      io::write_events(dir / name, s);
      CHECK(io::read_events(dir / name) == s);
    }
    CHECK(get(dir / "e.evf2").size() == 16);
  }
  SUBCASE("a million random events, binary") {
    const EventStream s = random_stream(1'000'000, 5);
    io::write_events(dir / "big.evf2", s);
    CHECK(fs::file_size(dir / "big.evf2") == 16 + 13 * s.size());
    CHECK(io::read_events(dir / "big.evf2") == s);
  }
  SUBCASE("text round trip and layout") {
    const EventStream s = random_stream(2000, 6);
    io::write_events(dir / "s.evt", s);
    const std::string txt = get(dir / "s.evt");
    CHECK(txt.rfind("# evf1 640 480 0.150000006\n", 0) == 0);
    CHECK(io::read_events(dir / "s.evt") == s);
    io::write_events(dir / "s.bin", s, io::EventFormat::binary);
    CHECK(io::read_events(dir / "s.bin") == s);
  }
  SUBCASE("metadata sidecar") {
    EventStream s = random_stream(10, 7);
    s.scan = ScanCurve::circle(3.0, 250.0, 0.4);
    s.layout = MosaicLayout::kaleidoscope(4, 4, 640, 480);
    s.span = TimeSpan{0, 4001};
    io::write_events(dir / "m.evf2", s);
    CHECK(fs::exists(dir / "m.evf2.meta.json"));
    const EventStream back = io::read_events(dir / "m.evf2");
    CHECK(back == s);
  }
}

TEST_CASE("binary event errors carry the record index") {
  test::TempDir dir;
  const EventStream s = random_stream(100, 8);
  io::write_events(dir / "ok.evf2", s);
  const std::string raw = get(dir / "ok.evf2");
  put(dir / "trunc.evf2", raw.substr(0, 16 + 13 * 41 + 5));
  CHECK(parse_offset([&] { io::read_events(dir / "trunc.evf2"); }) == 41);
  put(dir / "tail.evf2", raw + "x");
  CHECK(parse_offset([&] { io::read_events(dir / "tail.evf2"); }) == 100);
  std::string bad = raw;
  bad[16 + 13 * 7 + 12] = 5;
  put(dir / "pol.evf2", bad);
  CHECK(parse_offset([&] { io::read_events(dir / "pol.evf2"); }) == 7);
  EventStream oob = s;
  oob.events[30].x = 640;
  io::write_events(dir / "oob.evf2", oob);
  CHECK(parse_offset([&] { io::read_events(dir / "oob.evf2"); }) == 30);
  EventStream back = s;
  back.events[50].t += 1000;
  io::write_events(dir / "order.evf2", back);
  CHECK(parse_offset([&] { io::read_events(dir / "order.evf2"); }) == 51);
  put(dir / "magic.evf2", "EVF3" + raw.substr(4));
  CHECK_THROWS_AS(io::read_events(dir / "magic.evf2"), ParseError);
}

TEST_CASE("text event errors carry the line number") {
  test::TempDir dir;
  put(dir / "a.evt", "# evf1 4 4 0.1\n0,0,0,1\n5,1,1,2\n");
  CHECK(parse_offset([&] { io::read_events(dir / "a.evt"); }) == 3);
  put(dir / "b.evt", "# evf1 4 4 0.1\n0,0,0,1\n5,1,1,1");
  CHECK(parse_offset([&] { io::read_events(dir / "b.evt"); }) == 3);
  put(dir / "c.evt", "# evf1 4 4 0.1\n10,0,0,1\n5,1,1,1\n");
  CHECK(parse_offset([&] { io::read_events(dir / "c.evt"); }) == 3);
  put(dir / "d.evt", "# evf1 4 4 0.1\n10,0,0,1\n10,0,0,-1\n");
  CHECK(parse_offset([&] { io::read_events(dir / "d.evt"); }) == 3);
  put(dir / "e.evt", "# evf1 4 4 0.1\n-1,0,0,1\n");
  CHECK(parse_offset([&] { io::read_events(dir / "e.evt"); }) == 2);
  put(dir / "f.evt", "# evf1 4 4\n");
  CHECK(parse_offset([&] { io::read_events(dir / "f.evt"); }) == 1);
  put(dir / "g.evt", "# evf1 4 4 0.1\n1,2,3\n");
  CHECK(parse_offset([&] { io::read_events(dir / "g.evt"); }) == 2);
  put(dir / "h.evt", "# evf1 4 4 0.1\n1,4,0,1\n");
  CHECK(parse_offset([&] { io::read_events(dir / "h.evt"); }) == 2);
  CHECK_THROWS_AS(io::read_events(dir / "none.evt"), DomainError);
}

TEST_CASE("scene documents") {
  test::TempDir dir;
  const io::json minimal = {
      {"width", 16}, {"height", 12}, {"focus_distance", 3.0}, {"disparity_constant", 8.0},
      {"background", {{"texture", {{"type", "constant"}, {"width", 16}, {"height", 12}, {"value", 0.5}}}, {"depth", 3.0}}}};
  const LayeredScene s = io::scene_from_json(minimal, dir.path());
  CHECK(s.width == 16);
  CHECK(s.background.texture.at(3, 3) == 0.5);

  io::json layered = minimal;
  layered["layers"] = io::json::array({{{"texture", "front.pgm"}, {"depth", 2.0}, {"position", {4, 2}},
                                        {"alpha", {{"type", "rect"}, {"x0", 1}, {"y0", 1}, {"x1", 3}, {"y1", 3}}}}});
  try {
    io::scene_from_json(layered, dir.path());
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("front.pgm") != std::string::npos);
  }
  io::write_image(dir / "front.pgm", Image(4, 4, 1, 0.25));
  const LayeredScene l = io::scene_from_json(layered, dir.path());
  REQUIRE(l.layers.size() == 1);
  CHECK(l.layers[0].position.x == 4.0);
  CHECK(l.layers[0].alpha(0, 0) == 0.0);
  CHECK(l.layers[0].alpha(1, 1) == 1.0);

  io::json bad = minimal;
  bad["background"]["depth"] = 0.0;
  CHECK_THROWS_AS(io::scene_from_json(bad, dir.path()), DomainError);
  bad = minimal;
  bad.erase("width");
  CHECK_THROWS_AS(io::scene_from_json(bad, dir.path()), DomainError);
}

TEST_CASE("structured round trips") {
  test::TempDir dir;
  SUBCASE("scan curve and layout") {
    ScanCurve c = ScanCurve::circle(2.5, 500.0, 0.3);
    CHECK(io::scan_curve_from_json(io::to_json(c)) == c);
    const MosaicLayout l = MosaicLayout::kaleidoscope(3, 3, 99, 60);
    CHECK(io::mosaic_layout_from_json(io::to_json(l)) == l);
  }
  SUBCASE("light field") {
    std::mt19937_64 rng(3);
    LightField lf;
    lf.views = {{0, 0}, {1.5, -0.5}, {-2, 1}};
    for (int i = 0; i < 3; ++i) lf.images.push_back(test::random_image(8, 6, 1, rng, -0.2, 0.4));
    lf.timestamp = 0.004;
    io::write_lightfield(dir / "lf", lf);
    const LightField back = io::read_lightfield(dir / "lf");
    CHECK(back.views == lf.views);
    CHECK(back.timestamp == lf.timestamp);
    for (int i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < lf.images[i].data().size(); ++k)
        CHECK(std::abs(back.images[i].data()[k] - lf.images[i].data()[k]) <= 0.6 / 65535 + 1e-12);
  }
  SUBCASE("depth map") {
    DepthMap m{Grid<double>(4, 3, 2.5), Grid<double>(4, 3, 0.75), Grid<std::int32_t>(4, 3, 1)};
    m.depth(1, 1) = DepthMap::kInvalid;
    io::write_depthmap(dir / "d", m, "m");
    CHECK(fs::exists(dir / "d.ppm"));
    const DepthMap back = io::read_depthmap(dir / "d.evd");
    CHECK(back.depth(0, 0) == 2.5);
    CHECK(std::isnan(back.depth(1, 1)));
    CHECK(back.confidence(3, 2) == 0.75);
  }
  SUBCASE("calibration") {
    CalibrationResult r;
    r.circle_center = {0.1, -0.2};
    r.radius = 3.5;
    r.phase_offset = 0.7;
    r.rms_residual = 0.01;
    r.per_frame_views = {{1, 2}, {3, 4}};
    DepthFit f;
    f.slope = -10;
    f.intercept = 110;
    f.disparity_min = 1;
    f.disparity_max = 9;
    r.depth_fit = f;
    const CalibrationResult b = io::calibration_from_json(io::to_json(r));
    CHECK(b.radius == 3.5);
    CHECK(b.phase_offset == 0.7);
    CHECK(b.per_frame_views == r.per_frame_views);
    REQUIRE(b.depth_fit);
    CHECK(b.depth_fit->intercept == 110);
  }
  SUBCASE("metrics csv") {
    io::write_metrics_csv(dir / "m.csv", {{"error", 0.125, "< 0.1", false}, {"count", 3, "", true}});
    CHECK(get(dir / "m.csv") == "metric,value,tolerance,pass\nerror,0.125,< 0.1,fail\ncount,3,,pass\n");
  }
  SUBCASE("malformed json") {
    put(dir / "j.json", "{\"a\": [1, 2,");
    CHECK_THROWS_AS(io::read_json(dir / "j.json"), ParseError);
  }
}
