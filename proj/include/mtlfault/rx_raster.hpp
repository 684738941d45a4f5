#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mtlfault/relay_model.hpp"

namespace mtlfault {

struct ViewWindow {
  double r_min = -50.0;
  double r_max = 250.0;
  double x_min = -50.0;
  double x_max = 250.0;
};

void validate(const ViewWindow& w);

/// 8-bit grayscale, row-major, row 0 at the x_max edge.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill);

  std::uint8_t at(int col, int row) const {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }
  void set(int col, int row, std::uint8_t v) {
    pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col)] = v;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct Pixel {
  int col = 0;
  int row = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

inline constexpr std::uint8_t kBackground = 255;
inline constexpr std::uint8_t kZoneIntensity = 128;
inline constexpr std::uint8_t kLocusIntensity = 0;

/// Empty when `p` lies outside the window (bounds inclusive).
std::optional<Pixel> world_to_pixel(ImpedancePoint p, const ViewWindow& w, int width, int height);

/// Integer Bresenham line, endpoints inclusive.
void draw_line(GrayImage& img, Pixel a, Pixel b, std::uint8_t value);

/// Clips segment a-b to the window and rasterizes the visible part.
void draw_segment(GrayImage& img, ImpedancePoint a, ImpedancePoint b, const ViewWindow& w,
                  std::uint8_t value);

/// Zones as closed polylines at 128, then the locus polyline at 0, on 255.
GrayImage render_scene(const ImpedanceLocus& locus,
                       std::span<const std::vector<ImpedancePoint>> zones, const ViewWindow& w,
                       int width = 256, int height = 256);

/// Binary PGM (P5, maxval 255).
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

}  // namespace mtlfault
