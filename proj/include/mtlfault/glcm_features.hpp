#pragma once

// Gray-level co-occurrence texture statistics.
//
// Feature order (1-based, as written to CSV columns f01..f20):
//   1 mean        2 variance      3 entropy        4 energy (ASM)
//   5 contrast    6 correlation   7 inverse difference moment
//   8 dissimilarity               9 homogeneity   10 maximum probability
//  11 autocorrelation            12 cluster shade 13 cluster prominence
//  14 sum mean   15 sum variance 16 sum entropy   17 difference mean
//  18 difference variance        19 difference entropy
//  20 information measure of correlation 1
// Logarithms are base 2 with 0 log 0 = 0.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtlfault/rx_raster.hpp"

namespace mtlfault {

struct LevelMatrix {
  int width = 0;
  int height = 0;
  int levels = 0;
  std::vector<std::uint8_t> data;  // row-major

  int at(int col, int row) const {
    return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }
};

struct GlcmOffset {
  int drow = 0;
  int dcol = 0;
};

/// Row i, column j: probability that a pixel at level i has a neighbour at
/// level j at the configured offset(s).
struct Glcm {
  int levels = 0;
  std::vector<double> p;  // levels * levels, row-major

  double operator()(int i, int j) const {
    return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(levels) +
             static_cast<std::size_t>(j)];
  }
  Glcm transposed() const;
};

inline constexpr std::size_t kFeatureCount = 20;
using FeatureVector = std::array<double, kFeatureCount>;

/// Column names f01..f20.
std::vector<std::string> feature_names();

/// Default offsets: 0, 45, 90 and 135 degrees at distance 1.
std::vector<GlcmOffset> default_offsets();

/// level = floor(intensity * L / 256), L in [2, 256].
LevelMatrix quantize(const GrayImage& img, int levels);

/// Raw pair counts for one offset (transposed counts added when symmetric).
std::vector<std::uint64_t> glcm_counts(const LevelMatrix& lm, GlcmOffset offset, bool symmetric);

/// Per-offset matrices normalized to unit sum, then averaged.
Glcm compute_glcm(const LevelMatrix& lm, const std::vector<GlcmOffset>& offsets, bool symmetric);

FeatureVector features20(const Glcm& g);

}  // namespace mtlfault
