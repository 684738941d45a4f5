#include "mtlfault/simd/kernels.hpp"

namespace mtlfault::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) {
      const double prod = a[i + k] * b[i + k];
      lane[k] = lane[k] + prod;
    }
  }
  double s = (lane[0] + lane[2]) + (lane[1] + lane[3]);
  for (; i < n; ++i) {
    const double prod = a[i] * b[i];
    s = s + prod;
  }
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) {
      const double d = a[i + k] - b[i + k];
      const double sq = d * d;
      lane[k] = lane[k] + sq;
    }
  }
  double s = (lane[0] + lane[2]) + (lane[1] + lane[3]);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    const double sq = d * d;
    s = s + sq;
  }
  return s;
}

void quantize_u8(const std::uint8_t* in, std::uint8_t* out, std::size_t n, unsigned levels) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>((static_cast<unsigned>(in[i]) * levels) >> 8);
  }
}

}  // namespace mtlfault::simd::scalar
