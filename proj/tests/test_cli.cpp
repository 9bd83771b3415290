#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "evfield/io.hpp"
#include "evfield/scenarios.hpp"
#include "support.hpp"

using namespace evf;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + EVF_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Two static planes on a 64x64 sensor with both capture designs configured.
fs::path write_static_scenario(const fs::path& dir) {
  const io::json doc = {
      {"scene",
       {{"width", 64},
        {"height", 64},
        {"focus_distance", 3.0},
        {"disparity_constant", 8.0},
        {"background",
         {{"texture", {{"type", "noise"}, {"width", 96}, {"height", 96}, {"seed", 4}, {"low", 0.2}, {"high", 1.0}, {"sigma", 1.0}}},
          {"depth", 6.0},
          {"position", {-16, -16}}}},
        {"layers",
         {{{"texture", {{"type", "blocks"}, {"width", 24}, {"height", 24}, {"seed", 5}, {"cell", 4}, {"low", 0.2}, {"high", 1.0}}},
           {"alpha", {{"type", "rect"}, {"x0", 2}, {"y0", 2}, {"x1", 22}, {"y1", 22}}},
           {"depth", 2.0},
           {"position", {20, 20}}}}}}},
      {"sensor", {{"threshold", 0.1}}},
      {"galvo", {{"radius", 2.0}, {"frequency", 250.0}, {"sample_rate", 5000.0}, {"bins", 20}}},
      {"kaleidoscope", {{"views", 4}, {"pitch", 1.0}, {"sample_rate", 5000.0}}}};
  const fs::path p = dir / "static.json";
  io::write_json(p, doc);
  return p;
}

}  // namespace

TEST_CASE("cli: static scene through both designs") {
  test::TempDir dir;
  const fs::path cfg = write_static_scenario(dir.path());
  const std::string base = " --config \"" + cfg.string() + "\" --out \"";
  REQUIRE(run("simulate --design kaleidoscope" + base + (dir / "k").string() + "\"") == 0);
  CHECK(io::read_events(dir / "k" / "events.evf2").events.empty());
  CHECK(fs::exists(dir / "k" / "manifest.json"));

  REQUIRE(run("simulate --design galvo" + base + (dir / "g1").string() + "\"") == 0);
  REQUIRE(run("simulate --design galvo --threads 1" + base + (dir / "g2").string() + "\"") == 0);
  const EventStream g = io::read_events(dir / "g1" / "events.evf2");
  CHECK(g.size() > 100);
  REQUIRE(g.scan);
  CHECK(g.scan->frequency_s == 250.0);
  CHECK(slurp(dir / "g1" / "events.evf2") == slurp(dir / "g2" / "events.evf2"));

  REQUIRE(run("simulate --design galvo --format text" + base + (dir / "t").string() + "\"") == 0);
  CHECK(io::read_events(dir / "t" / "events.evt").events == g.events);

  REQUIRE(run("integrate --bins 20 --decay 0 --events \"" + (dir / "g1" / "events.evf2").string() + "\" --out \"" +
              (dir / "lf").string() + "\"") == 0);
  CHECK(io::read_lightfield(dir / "lf" / "lightfield").size() == 20);
}

TEST_CASE("cli: refocus at the focus distance equals the aperture average") {
  test::TempDir dir;
  const fs::path cfg = write_static_scenario(dir.path());
  REQUIRE(run("render --circle 12 --radius 2 --config \"" + cfg.string() + "\" --out \"" + (dir / "r").string() + "\"") == 0);
  const fs::path lf_dir = dir / "r" / "lightfield";
  const LightField lf = io::read_lightfield(lf_dir);
  REQUIRE(lf.size() == 12);
  REQUIRE(run("refocus --depth 3 --d0 3 -A 8 --lightfield \"" + lf_dir.string() + "\" --out \"" + (dir / "f").string() + "\"") == 0);
  // the aperture average written by the library is the same file, byte for byte
  io::write_normalized(dir / "avg.pgm", integrate_aperture(lf));
  CHECK(slurp(dir / "f" / "refocused.pgm") == slurp(dir / "avg.pgm"));
  CHECK(slurp(dir / "f" / "refocused.pgm.json") == slurp(dir / "avg.pgm.json"));

  // shift measured on the front layer's patch matches its disparity
  REQUIRE(run("refocus --patch 22,22,18,18 --lightfield \"" + lf_dir.string() + "\" --out \"" + (dir / "p").string() + "\"") == 0);
  const double measured = io::read_json(dir / "p" / "manifest.json").at("metrics").at("shift");
  CHECK(measured == doctest::Approx(layer_disparity(2.0, 3.0, 8.0)).epsilon(0.03));

  REQUIRE(run("depth --depths 1.5,2,2.5,3,4,6,8 --d0 3 -A 8 --min-contrast 1e-5 --lightfield \"" + lf_dir.string() +
              "\" --out \"" + (dir / "d").string() + "\"") == 0);
  CHECK(fs::exists(dir / "d" / "depth.evd"));
}

TEST_CASE("cli: exit codes") {
  test::TempDir dir;
  const std::string out = " --out \"" + (dir / "o").string() + "\"";
  CHECK(run("simulate --config \"" + (dir / "missing.json").string() + "\"" + out) == 2);
  CHECK(run("simulate --design nope" + out) == 2);
  CHECK(run("nonsense") == 2);
  const fs::path cfg = write_static_scenario(dir.path());
  CHECK(run("simulate --threads zero --config \"" + cfg.string() + "\"" + out) == 2);
  std::ofstream(dir / "bad.json") << "{\"scene\": [";
  CHECK(run("simulate --config \"" + (dir / "bad.json").string() + "\"" + out) == 2);
  std::ofstream(dir / "flat.csv") << "disparity,depth\n2,10\n2,20\n2,30\n";
  CHECK(run("depthfit --pairs \"" + (dir / "flat.csv").string() + "\"" + out) == 3);
  std::ofstream(dir / "line.csv") << "1,100\n2,90\n4,70\n";
  CHECK(run("depthfit --pairs \"" + (dir / "line.csv").string() + "\"" + out) == 0);
  const io::json fit = io::read_json(dir / "o" / "depth_fit.json");
  CHECK(fit.at("slope").get<double>() == doctest::Approx(-10.0));
}

TEST_CASE("cli: depth on the two-plane scenario reproduces the library numbers") {
  test::TempDir dir;
  const fs::path cfg = fs::path(EVF_SCENARIO_DIR) / "depth_from_focus.json";
  REQUIRE(run("depth --config \"" + cfg.string() + "\" --out \"" + (dir / "d").string() + "\"") == 0);
  const io::json m = io::read_json(dir / "d" / "manifest.json").at("metrics");
  const auto r = scenarios::run_depth(scenarios::Scenario::load(cfg), {});
  CHECK(m.at("fraction_within_one_slice").get<double>() == r.fraction_within);
  CHECK(m.at("valid_pixels").get<double>() == static_cast<double>(r.valid));
  CHECK(m.at("gain_argmax_agreement").get<double>() == r.gain_agreement);
  CHECK(r.fraction_within >= 0.95);
  const DepthMap back = io::read_depthmap(dir / "d" / "depth.evd");
  REQUIRE(back.depth.same_shape(r.map.depth));
  for (std::size_t i = 0; i < back.depth.size(); ++i) {
    if (std::isnan(r.map.depth[i])) {
      CHECK(std::isnan(back.depth[i]));
    } else {
      CHECK(back.depth[i] == static_cast<double>(static_cast<float>(r.map.depth[i])));
    }
  }
}
