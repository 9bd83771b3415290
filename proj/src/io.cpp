#include "evfield/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "evfield/error.hpp"
#include "evfield/textures.hpp"

namespace evf::io {

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

fs::path sidecar(const fs::path& p, const char* suffix) {
  return fs::path(p.string() + suffix);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') ++pos;
  if (start == pos) throw ParseError("pnm: truncated header at byte " + std::to_string(start), start);
  return {buf.begin() + static_cast<std::ptrdiff_t>(start), buf.begin() + static_cast<std::ptrdiff_t>(pos)};
}

int pnm_int(const std::vector<std::uint8_t>& buf, std::size_t& pos, const char* what) {
  const std::size_t at = pos;
  const std::string tok = pnm_token(buf, pos);
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
    throw ParseError(std::string("pnm: bad ") + what + " near byte " + std::to_string(at), at);
  return v;
}

}  // namespace

// ---- images ---------------------------------------------------------------

PnmImage read_pnm(const fs::path& path) {
  const auto buf = slurp(path);
  std::size_t pos = 0;
  const std::string magic = pnm_token(buf, pos);
  PnmImage img;
  if (magic == "P5") img.channels = 1;
  else if (magic == "P6") img.channels = 3;
  else throw ParseError("pnm: unsupported magic '" + magic + "' in " + path.string(), 0);
  img.width = pnm_int(buf, pos, "width");
  img.height = pnm_int(buf, pos, "height");
  img.maxval = pnm_int(buf, pos, "maxval");
  if (img.maxval > 65535) throw ParseError("pnm: maxval above 65535", pos);
  if (pos >= buf.size() || !std::isspace(buf[pos]))
    throw ParseError("pnm: missing whitespace after header at byte " + std::to_string(pos), pos);
  ++pos;
  const std::size_t bytes = img.maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (buf.size() - pos != n * bytes)
    throw ParseError("pnm: expected " + std::to_string(n * bytes) + " data bytes after byte " +
                         std::to_string(pos) + ", found " + std::to_string(buf.size() - pos),
                     pos);
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = bytes == 1 ? buf[pos + i]
                                       : static_cast<std::uint16_t>(buf[pos + 2 * i] << 8 | buf[pos + 2 * i + 1]);
    if (v > img.maxval) throw ParseError("pnm: sample exceeds maxval at byte " + std::to_string(pos + i * bytes), pos + i * bytes);
    img.samples[i] = v;
  }
  return img;
}

void write_pnm(const fs::path& path, const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw DomainError("write_pnm: channels must be 1 or 3");
  if (img.maxval < 1 || img.maxval > 65535) throw DomainError("write_pnm: bad maxval");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                             std::to_string(img.maxval) + "\n";
  const std::size_t bytes = img.maxval < 256 ? 1 : 2;
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.samples.size() * bytes);
  for (std::uint16_t v : img.samples) {
    if (bytes == 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  spill(path, out.data(), out.size());
}

Image to_image(const PnmImage& pnm) {
  Image img(pnm.width, pnm.height, pnm.channels);
  for (std::size_t i = 0; i < pnm.samples.size(); ++i)
    img.data()[i] = static_cast<double>(pnm.samples[i]) / pnm.maxval;
  return img;
}

PnmImage quantize(const Image& img, int maxval) {
  PnmImage p{img.width(), img.height(), img.channels(), maxval, {}};
  p.samples.resize(img.data().size());
  for (std::size_t i = 0; i < p.samples.size(); ++i)
    p.samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * maxval));
  return p;
}

Image read_image(const fs::path& path) { return to_image(read_pnm(path)); }

void write_image(const fs::path& path, const Image& img, int maxval) {
  write_pnm(path, quantize(img, maxval));
}

namespace {

std::pair<double, double> value_range(std::span<const double> d) {
  if (d.empty()) return {0.0, 0.0};
  const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
  return {*mn, *mx};
}

Image normalized(const Image& img, double lo, double hi) {
  Image n = img;
  const double span = hi - lo;
  for (auto& v : n.data()) v = span > 0.0 ? (v - lo) / span : 0.0;
  return n;
}

Image denormalized(Image img, double lo, double hi) {
  for (auto& v : img.data()) v = lo + v * (hi - lo);
  return img;
}

}  // namespace

void write_normalized(const fs::path& path, const Image& img) {
  const auto [lo, hi] = value_range(img.data());
  write_image(path, normalized(img, lo, hi), 65535);
  write_json(sidecar(path, ".json"), json{{"min", lo}, {"max", hi}});
}

Image read_normalized(const fs::path& path) {
  const json meta = read_json(sidecar(path, ".json"));
  return denormalized(read_image(path), meta.at("min").get<double>(), meta.at("max").get<double>());
}

// ---- events ---------------------------------------------------------------

EventFormat format_for(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".evf2" || ext == ".bin") ? EventFormat::binary : EventFormat::text;
}

namespace {

json metadata_json(const EventStream& s) {
  json meta = json::object();
  if (s.scan) meta["scan"] = to_json(*s.scan);
  if (s.layout) meta["layout"] = to_json(*s.layout);
  if (s.span) meta["span"] = {s.span->begin, s.span->end};
  return meta;
}

void apply_metadata(EventStream& s, const json& meta) {
  if (meta.contains("scan")) s.scan = scan_curve_from_json(meta["scan"]);
  if (meta.contains("layout")) s.layout = mosaic_layout_from_json(meta["layout"]);
  if (meta.contains("span")) s.span = TimeSpan{meta["span"][0].get<std::int64_t>(), meta["span"][1].get<std::int64_t>()};
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

// Shared record checks for both readers; `where` names the record or line.
class StreamChecker {
 public:
  StreamChecker(int w, int h) : w_(w), h_(h), last_(static_cast<std::size_t>(w) * h, -1) {}
  void check(const Event& e, const std::string& where, std::size_t offset) {
    if (e.x >= w_ || e.y >= h_) throw ParseError("events: coordinates out of bounds at " + where, offset);
    if (e.t < 0) throw ParseError("events: negative timestamp at " + where, offset);
    if (e.t < prev_) throw ParseError("events: timestamps not monotone at " + where, offset);
    auto& l = last_[static_cast<std::size_t>(e.y) * w_ + e.x];
    if (e.t <= l) throw ParseError("events: repeated pixel timestamp at " + where, offset);
    l = prev_ = e.t;
  }

 private:
  int w_, h_;
  std::int64_t prev_ = 0;
  std::vector<std::int64_t> last_;
};

template <class T>
void append_int(std::string& out, T v) {
  char buf[24];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

void write_text(const fs::path& path, const EventStream& s) {
  char cbuf[32];
  std::snprintf(cbuf, sizeof cbuf, "%.9g", static_cast<double>(s.threshold));
  std::string out = "# evf1 " + std::to_string(s.width) + " " + std::to_string(s.height) + " " + cbuf + "\n";
  out.reserve(out.size() + s.events.size() * 20);
  for (const Event& e : s.events) {
    append_int(out, e.t);
    out += ',';
    append_int(out, e.x);
    out += ',';
    append_int(out, e.y);
    out += ',';
    append_int(out, static_cast<int>(e.polarity));
    out += '\n';
  }
  spill(path, out.data(), out.size());
}

void write_binary(const fs::path& path, const EventStream& s) {
  if (s.events.size() > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("EVF2 holds at most 2^32-1 events");
  std::vector<std::uint8_t> out;
  out.reserve(16 + s.events.size() * 13);
  for (char c : {'E', 'V', 'F', '2'}) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.height));
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(s.threshold));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.events.size()));
  for (const Event& e : s.events) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t));
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    out.push_back(e.polarity > 0 ? 1 : 0);
  }
  spill(path, out.data(), out.size());
}

EventStream read_binary(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 16) throw ParseError("EVF2: header truncated (" + std::to_string(buf.size()) + " bytes)", buf.size());
  if (std::memcmp(buf.data(), "EVF2", 4) != 0) throw ParseError("EVF2: bad magic", 0);
  EventStream s;
  s.width = get_le<std::uint16_t>(&buf[4]);
  s.height = get_le<std::uint16_t>(&buf[6]);
  s.threshold = std::bit_cast<float>(get_le<std::uint32_t>(&buf[8]));
  const std::size_t count = get_le<std::uint32_t>(&buf[12]);
  if (s.width == 0 || s.height == 0) throw ParseError("EVF2: zero sensor size", 4);
  if (!(s.threshold > 0.0f)) throw ParseError("EVF2: threshold must be positive", 8);
  const std::size_t records = (buf.size() - 16) / 13;
  if (records < count)
    throw ParseError("EVF2: truncated at record " + std::to_string(records) + " of " + std::to_string(count), records);
  if (buf.size() != 16 + count * 13) throw ParseError("EVF2: trailing bytes after record " + std::to_string(count), count);
  s.events.resize(count);
  StreamChecker checker(s.width, s.height);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* r = &buf[16 + i * 13];
    const auto t = get_le<std::uint64_t>(r);
    const std::uint8_t pol = r[12];
    if (pol > 1) throw ParseError("EVF2: bad polarity byte at record " + std::to_string(i), i);
    if (t > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw ParseError("EVF2: timestamp overflow at record " + std::to_string(i), i);
    Event e{static_cast<std::int64_t>(t), get_le<std::uint16_t>(r + 8), get_le<std::uint16_t>(r + 10),
            static_cast<std::int8_t>(pol ? 1 : -1)};
    checker.check(e, "record " + std::to_string(i), i);
    s.events[i] = e;
  }
  return s;
}

template <class T>
bool parse_field(std::string_view f, T& out) {
  auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
  return ec == std::errc() && p == f.data() + f.size();
}

EventStream read_text(const std::vector<std::uint8_t>& buf) {
  std::string_view text(reinterpret_cast<const char*>(buf.data()), buf.size());
  EventStream s;
  std::size_t pos = text.find('\n');
  if (pos == std::string_view::npos) throw ParseError("evf1: missing header line (line 1)", 1);
  {
    std::istringstream hdr{std::string(text.substr(0, pos))};
    std::string hash, magic, c;
    if (!(hdr >> hash >> magic >> s.width >> s.height >> c) || hash != "#" || magic != "evf1")
      throw ParseError("evf1: malformed header (line 1)", 1);
    std::string rest;
    if (hdr >> rest) throw ParseError("evf1: trailing header fields (line 1)", 1);
    char* end = nullptr;
    s.threshold = std::strtof(c.c_str(), &end);
    if (*end != '\0' || !(s.threshold > 0.0f)) throw ParseError("evf1: bad threshold (line 1)", 1);
    if (s.width <= 0 || s.height <= 0 || s.width > 65535 || s.height > 65535)
      throw ParseError("evf1: bad sensor size (line 1)", 1);
  }
  ++pos;
  StreamChecker checker(s.width, s.height);
  std::size_t line_no = 1;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) throw ParseError("evf1: missing newline at line " + std::to_string(line_no), line_no);
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    std::string_view fields[4];
    std::size_t start = 0, nf = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (nf == 4) { nf = 5; break; }
        fields[nf++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    const std::string where = "line " + std::to_string(line_no);
    if (nf != 4) throw ParseError("evf1: expected 4 fields at " + where, line_no);
    std::int64_t t = 0;
    unsigned x = 0, y = 0;
    int p = 0;
    if (!parse_field(fields[0], t) || !parse_field(fields[1], x) || !parse_field(fields[2], y) ||
        !parse_field(fields[3], p) || (p != 1 && p != -1) || x > 65535 || y > 65535)
      throw ParseError("evf1: malformed event at " + where, line_no);
    Event e{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)};
    checker.check(e, where, line_no);
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

void write_events(const fs::path& path, const EventStream& stream, EventFormat format) {
  if (format == EventFormat::binary) write_binary(path, stream);
  else write_text(path, stream);
  const json meta = metadata_json(stream);
  const fs::path side = sidecar(path, ".meta.json");
  if (meta.empty()) {
    std::error_code ec;
    fs::remove(side, ec);
  } else {
    write_json(side, meta);
  }
}

void write_events(const fs::path& path, const EventStream& stream) {
  write_events(path, stream, format_for(path));
}

EventStream read_events(const fs::path& path) {
  const auto buf = slurp(path);
  EventStream s = (buf.size() >= 4 && std::memcmp(buf.data(), "EVF2", 4) == 0) ? read_binary(buf) : read_text(buf);
  const fs::path side = sidecar(path, ".meta.json");
  if (fs::exists(side)) apply_metadata(s, read_json(side));
  return s;
}

// ---- structured documents -------------------------------------------------

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

void write_json(const fs::path& path, const json& j) {
  const std::string s = j.dump(2) + "\n";
  spill(path, s.data(), s.size());
}

json to_json(const ScanCurve& c) {
  return {{"amplitude", {c.amplitude_s, c.amplitude_t}},
          {"frequency", {c.frequency_s, c.frequency_t}},
          {"phase", {c.phase_s, c.phase_t}},
          {"period", c.period}};
}

ScanCurve scan_curve_from_json(const json& j) {
  ScanCurve c;
  if (j.contains("circle")) {
    const json& k = j["circle"];
    c = ScanCurve::circle(k.at("radius").get<double>(), k.at("frequency").get<double>(), k.value("phase", 0.0));
  } else {
    c.amplitude_s = j.at("amplitude")[0];
    c.amplitude_t = j.at("amplitude")[1];
    c.frequency_s = j.at("frequency")[0];
    c.frequency_t = j.at("frequency")[1];
    c.phase_s = j.at("phase")[0];
    c.phase_t = j.at("phase")[1];
    c.period = j.at("period");
  }
  c.validate();
  return c;
}

json to_json(const MosaicLayout& l) {
  json flips = json::array();
  for (const auto& f : l.flips) flips.push_back({f.x, f.y});
  return {{"kind", l.kind == MosaicKind::kaleidoscope ? "kaleidoscope" : "microlens"},
          {"n", {l.nx, l.ny}},
          {"r", {l.rx, l.ry}},
          {"flips", flips}};
}

MosaicLayout mosaic_layout_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind != "kaleidoscope" && kind != "microlens") throw DomainError("mosaic kind must be kaleidoscope or microlens");
  const int nx = j.at("n")[0], ny = j.at("n")[1], rx = j.at("r")[0], ry = j.at("r")[1];
  MosaicLayout l = kind == "kaleidoscope" ? MosaicLayout::kaleidoscope(nx, ny, rx, ry)
                                          : MosaicLayout::microlens(nx, ny, rx, ry);
  if (j.contains("flips")) {
    l.flips.clear();
    for (const auto& f : j["flips"]) l.flips.push_back({f[0].get<bool>(), f[1].get<bool>()});
  }
  l.validate();
  return l;
}

json to_json(const ViewOffset& v) { return {{"s", v.s}, {"t", v.t}}; }

namespace {

Vec2 vec2(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return {j[key].at(0).get<double>(), j[key].at(1).get<double>()};
}

Image texture_from_json(const json& j, const fs::path& base) {
  if (j.is_string()) {
    const fs::path p = base / j.get<std::string>();
    if (!fs::exists(p)) throw DomainError("scene: texture file not found: " + p.string());
    return read_image(p);
  }
  const std::string type = j.at("type");
  const int w = j.at("width"), h = j.at("height");
  if (type == "noise")
    return textures::noise(w, h, j.value("seed", 0ULL), j.value("low", 0.0), j.value("high", 1.0), j.value("sigma", 0.0));
  if (type == "blocks")
    return textures::blocks(w, h, j.value("seed", 0ULL), j.value("cell", 8), j.value("low", 0.0), j.value("high", 1.0));
  if (type == "grid")
    return textures::grid(w, h, j.at("period"), j.at("line_width"), j.value("line", 0.1), j.value("bright", 1.0));
  if (type == "constant") return textures::constant(w, h, j.at("value"));
  throw DomainError("scene: unknown texture type '" + type + "'");
}

Grid<double> alpha_from_json(const json& j, const fs::path& base, int w, int h) {
  if (j.is_string()) {
    const fs::path p = base / j.get<std::string>();
    if (!fs::exists(p)) throw DomainError("scene: alpha file not found: " + p.string());
    const Image a = read_image(p);
    Grid<double> g = luminance(a);
    return g;
  }
  const std::string type = j.at("type");
  if (type == "rect") return textures::rect_alpha(w, h, j.at("x0"), j.at("y0"), j.at("x1"), j.at("y1"));
  if (type == "disk") return textures::disk_alpha(w, h, j.at("cx"), j.at("cy"), j.at("radius"));
  throw DomainError("scene: unknown alpha type '" + type + "'");
}

SceneLayer layer_from_json(const json& j, const fs::path& base) {
  SceneLayer l;
  l.texture = texture_from_json(j.at("texture"), base);
  if (j.contains("radiance_scale"))
    for (auto& v : l.texture.data()) v *= j["radiance_scale"].get<double>();
  if (j.contains("alpha")) l.alpha = alpha_from_json(j["alpha"], base, l.texture.width(), l.texture.height());
  l.depth = j.at("depth");
  l.position = vec2(j, "position");
  l.velocity = vec2(j, "velocity");
  l.angular_velocity = j.value("angular_velocity", 0.0);
  l.rotation_center = vec2(j, "rotation_center");
  return l;
}

}  // namespace

LayeredScene scene_from_json(const json& j, const fs::path& base_dir) {
  try {
    LayeredScene s;
    s.width = j.at("width");
    s.height = j.at("height");
    s.focus_distance = j.at("focus_distance");
    s.disparity_constant = j.at("disparity_constant");
    s.background = layer_from_json(j.at("background"), base_dir);
    if (j.contains("layers"))
      for (const auto& l : j["layers"]) s.layers.push_back(layer_from_json(l, base_dir));
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw DomainError(std::string("scene: ") + e.what());
  }
}

LayeredScene read_scene(const fs::path& path) {
  return scene_from_json(read_json(path), path.parent_path());
}

void write_lightfield(const fs::path& dir, const LightField& lf) {
  lf.validate();
  fs::create_directories(dir);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& img : lf.images) {
    const auto [a, b] = value_range(img.data());
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  json views = json::array();
  for (std::size_t i = 0; i < lf.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu.%s", i, lf.images[i].channels() == 1 ? "pgm" : "ppm");
    write_image(dir / name, normalized(lf.images[i], lo, hi), 65535);
    views.push_back({{"s", lf.views[i].s}, {"t", lf.views[i].t}, {"file", name}});
  }
  json idx = {{"width", lf.width()}, {"height", lf.height()}, {"channels", lf.images.front().channels()},
              {"min", lo}, {"max", hi}, {"views", views}};
  if (lf.timestamp) idx["timestamp"] = *lf.timestamp;
  write_json(dir / "index.json", idx);
}

LightField read_lightfield(const fs::path& dir) {
  const json idx = read_json(dir / "index.json");
  LightField lf;
  const int w = idx.at("width"), h = idx.at("height");
  const double lo = idx.at("min"), hi = idx.at("max");
  for (const auto& v : idx.at("views")) {
    const fs::path p = dir / v.at("file").get<std::string>();
    if (!fs::exists(p)) throw DomainError("light field: missing view file " + p.string());
    Image img = denormalized(read_image(p), lo, hi);
    if (img.width() != w || img.height() != h) throw DomainError("light field: view size mismatch in " + p.string());
    lf.views.push_back({v.at("s").get<double>(), v.at("t").get<double>()});
    lf.images.push_back(std::move(img));
  }
  if (idx.contains("timestamp")) lf.timestamp = idx["timestamp"].get<double>();
  lf.validate();
  return lf;
}

void write_focal_stack(const fs::path& dir, const FocalStack& stack) {
  fs::create_directories(dir);
  json slices = json::array();
  for (std::size_t i = 0; i < stack.slices.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "slice_%03zu.pgm", i);
    write_normalized(dir / name, stack.slices[i].image);
    slices.push_back({{"depth", stack.slices[i].depth}, {"file", name}});
  }
  write_json(dir / "index.json", {{"slices", slices}});
}

namespace {

// blue -> cyan -> yellow -> red
std::array<double, 3> colormap(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return {std::clamp(1.5 - std::abs(4.0 * u - 3.0), 0.0, 1.0), std::clamp(1.5 - std::abs(4.0 * u - 2.0), 0.0, 1.0),
          std::clamp(1.5 - std::abs(4.0 * u - 1.0), 0.0, 1.0)};
}

}  // namespace

void write_depthmap(const fs::path& base, const DepthMap& map, const std::string& units) {
  const int w = map.depth.width(), h = map.depth.height();
  std::string header = "EVD1\nwidth " + std::to_string(w) + "\nheight " + std::to_string(h) + "\nunits " + units +
                       "\ninvalid nan\nplanes depth confidence\nend_header\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const Grid<double>* g : {&map.depth, &map.confidence})
    for (double v : g->data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  spill(fs::path(base.string() + ".evd"), out.data(), out.size());

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : map.depth.data())
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Image preview(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = map.depth(x, y);
      if (!std::isfinite(d)) continue;
      const auto c = colormap(hi > lo ? (d - lo) / (hi - lo) : 0.5);
      for (int k = 0; k < 3; ++k) preview.at(x, y, k) = c[k];
    }
  write_image(fs::path(base.string() + ".ppm"), preview, 255);
}

DepthMap read_depthmap(const fs::path& path) {
  const auto buf = slurp(path);
  const std::string_view text(reinterpret_cast<const char*>(buf.data()), buf.size());
  const std::size_t end = text.find("end_header\n");
  if (text.substr(0, 5) != "EVD1\n" || end == std::string_view::npos) throw ParseError("evd: bad header", 0);
  std::istringstream hdr{std::string(text.substr(5, end - 5))};
  int w = 0, h = 0;
  std::string key, val;
  while (hdr >> key) {
    if (key == "width") hdr >> w;
    else if (key == "height") hdr >> h;
    else std::getline(hdr, val);
  }
  const std::size_t data = end + 11;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (w <= 0 || h <= 0 || buf.size() - data != 2 * n * 4) throw ParseError("evd: data size mismatch", data);
  DepthMap m{Grid<double>(w, h), Grid<double>(w, h), Grid<std::int32_t>(w, h, -1)};
  for (std::size_t i = 0; i < n; ++i) {
    m.depth[i] = std::bit_cast<float>(get_le<std::uint32_t>(&buf[data + 4 * i]));
    m.confidence[i] = std::bit_cast<float>(get_le<std::uint32_t>(&buf[data + 4 * (n + i)]));
  }
  return m;
}

json to_json(const CalibrationResult& r) {
  json views = json::array();
  for (const auto& v : r.per_frame_views) views.push_back({v.s, v.t});
  json j = {{"circle_center", {r.circle_center.x, r.circle_center.y}},
            {"radius", r.radius},
            {"phase_offset", r.phase_offset},
            {"rms_residual", r.rms_residual},
            {"per_frame_views", views}};
  if (r.depth_fit)
    j["depth_fit"] = {{"slope", r.depth_fit->slope},
                      {"intercept", r.depth_fit->intercept},
                      {"residual_rms", r.depth_fit->residual_rms},
                      {"disparity_range", {r.depth_fit->disparity_min, r.depth_fit->disparity_max}}};
  return j;
}

CalibrationResult calibration_from_json(const json& j) {
  CalibrationResult r;
  r.circle_center = {j.at("circle_center")[0], j.at("circle_center")[1]};
  r.radius = j.at("radius");
  r.phase_offset = j.at("phase_offset");
  r.rms_residual = j.value("rms_residual", 0.0);
  for (const auto& v : j.at("per_frame_views")) r.per_frame_views.push_back({v[0].get<double>(), v[1].get<double>()});
  if (j.contains("depth_fit")) {
    const json& d = j["depth_fit"];
    r.depth_fit = DepthFit{d.at("slope"), d.at("intercept"), d.at("residual_rms"),
                           d.at("disparity_range")[0], d.at("disparity_range")[1]};
  }
  return r;
}

void write_metrics_csv(const fs::path& path, const std::vector<Metric>& metrics) {
  std::string out = "metric,value,tolerance,pass\n";
  for (const auto& m : metrics) {
    char v[64];
    std::snprintf(v, sizeof v, "%.9g", m.value);
    out += m.name + "," + v + "," + m.tolerance + "," + (m.pass ? "pass" : "fail") + "\n";
  }
  spill(path, out.data(), out.size());
}

}  // namespace evf::io
