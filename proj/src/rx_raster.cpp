#include "mtlfault/rx_raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

bool inside(ImpedancePoint p, const ViewWindow& w) {
  return p.r >= w.r_min && p.r <= w.r_max && p.x >= w.x_min && p.x <= w.x_max;
}

// For points already clipped to the window, where rounding may leave them a
// hair outside.
Pixel to_pixel_clipped(ImpedancePoint p, const ViewWindow& w, int width, int height) {
  const double fc = (p.r - w.r_min) / (w.r_max - w.r_min) * (width - 1);
  const double fr = (w.x_max - p.x) / (w.x_max - w.x_min) * (height - 1);
  const int col = static_cast<int>(std::lround(fc));
  const int row = static_cast<int>(std::lround(fr));
  return {std::clamp(col, 0, width - 1), std::clamp(row, 0, height - 1)};
}

// Liang-Barsky. Returns false when nothing of the segment is inside.
bool clip(ImpedancePoint& a, ImpedancePoint& b, const ViewWindow& w) {
  const double dr = b.r - a.r;
  const double dx = b.x - a.x;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dr, dr, -dx, dx};
  const double q[4] = {a.r - w.r_min, w.r_max - a.r, a.x - w.x_min, w.x_max - a.x};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return false;
      continue;
    }
    const double t = q[k] / p[k];
    if (p[k] < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  const ImpedancePoint start = a;
  if (t0 > 0.0) a = {start.r + t0 * dr, start.x + t0 * dx};
  if (t1 < 1.0) b = {start.r + t1 * dr, start.x + t1 * dx};
  return true;
}

void draw_polyline(GrayImage& img, std::span<const ImpedancePoint> pts, bool closed,
                   const ViewWindow& w, std::uint8_t value) {
  if (pts.empty()) return;
  if (pts.size() == 1) {
    if (auto px = world_to_pixel(pts.front(), w, img.width, img.height)) {
      img.set(px->col, px->row, value);
    }
    return;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) draw_segment(img, pts[i], pts[i + 1], w, value);
  if (closed) draw_segment(img, pts.back(), pts.front(), w, value);
}

[[noreturn]] void format_error(const std::string& what) { throw FormatError("pgm: " + what); }

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

void validate(const ViewWindow& w) {
  const bool finite = std::isfinite(w.r_min) && std::isfinite(w.r_max) &&
                      std::isfinite(w.x_min) && std::isfinite(w.x_max);
  if (!finite || !(w.r_max > w.r_min) || !(w.x_max > w.x_min)) {
    throw ValidationError("view window needs r_max > r_min and x_max > x_min");
  }
}

std::optional<Pixel> world_to_pixel(ImpedancePoint p, const ViewWindow& w, int width, int height) {
  if (!inside(p, w)) return std::nullopt;
  const double fc = (p.r - w.r_min) / (w.r_max - w.r_min) * (width - 1);
  const double fr = (w.x_max - p.x) / (w.x_max - w.x_min) * (height - 1);
  return Pixel{static_cast<int>(std::lround(fc)), static_cast<int>(std::lround(fr))};
}

void draw_line(GrayImage& img, Pixel a, Pixel b, std::uint8_t value) {
  const int dx = std::abs(b.col - a.col);
  const int dy = -std::abs(b.row - a.row);
  const int sx = a.col < b.col ? 1 : -1;
  const int sy = a.row < b.row ? 1 : -1;
  int err = dx + dy;
  int c = a.col;
  int r = a.row;
  for (;;) {
    if (c >= 0 && c < img.width && r >= 0 && r < img.height) img.set(c, r, value);
    if (c == b.col && r == b.row) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      c += sx;
    }
    if (e2 <= dx) {
      err += dx;
      r += sy;
    }
  }
}

void draw_segment(GrayImage& img, ImpedancePoint a, ImpedancePoint b, const ViewWindow& w,
                  std::uint8_t value) {
  if (!clip(a, b, w)) return;
  draw_line(img, to_pixel_clipped(a, w, img.width, img.height),
            to_pixel_clipped(b, w, img.width, img.height), value);
}

GrayImage render_scene(const ImpedanceLocus& locus,
                       std::span<const std::vector<ImpedancePoint>> zones, const ViewWindow& w,
                       int width, int height) {
  validate(w);
  if (width < 2 || height < 2) throw ValidationError("image must be at least 2x2");
  GrayImage img(width, height, kBackground);
  for (const auto& zone : zones) draw_polyline(img, zone, true, w, kZoneIntensity);
  draw_polyline(img, locus.points, false, w, kLocusIntensity);
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
    throw ValidationError("image pixel count does not match its dimensions");
  }
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto is_space = [](std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) format_error(std::string(what) + " too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) format_error(std::string("missing ") + what);
    return static_cast<int>(value);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') format_error("missing P5 magic");
  pos = 2;
  const int width = read_int("width");
  const int height = read_int("height");
  const int maxval = read_int("maxval");
  if (width <= 0 || height <= 0) format_error("non-positive dimensions");
  if (maxval != 255) format_error("maxval " + std::to_string(maxval) + " unsupported (need 255)");
  if (pos >= bytes.size() || !is_space(bytes[pos])) format_error("header not terminated");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < need) {
    format_error("truncated payload: " + std::to_string(bytes.size() - pos) + " of " +
                 std::to_string(need) + " bytes");
  }
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

}  // namespace mtlfault
