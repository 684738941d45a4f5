// Compiled with -mavx2 (and without -mfma); only called after a CPUID check.
#include <immintrin.h>

#include "mtlfault/simd/kernels.hpp"

namespace mtlfault::simd::avx2 {

namespace {

// (l0 + l2) + (l1 + l3), matching the scalar reference.
inline double reduce_lanes(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  double s = reduce_lanes(acc);
  for (; i < n; ++i) {
    const double prod = a[i] * b[i];
    s = s + prod;
  }
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = reduce_lanes(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    const double sq = d * d;
    s = s + sq;
  }
  return s;
}

void quantize_u8(const std::uint8_t* in, std::uint8_t* out, std::size_t n, unsigned levels) {
  // 255 * 256 fits in an unsigned 16-bit lane, so mullo is exact.
  const __m256i mul = _mm256_set1_epi16(static_cast<short>(levels));
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m128i bytes = _mm_loadu_si128(reinterpret_cast<const __m128i*>(in + i));
    const __m256i wide = _mm256_cvtepu8_epi16(bytes);
    const __m256i scaled = _mm256_srli_epi16(_mm256_mullo_epi16(wide, mul), 8);
    const __m128i packed =
        _mm_packus_epi16(_mm256_castsi256_si128(scaled), _mm256_extracti128_si256(scaled, 1));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), packed);
  }
  for (; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>((static_cast<unsigned>(in[i]) * levels) >> 8);
  }
}

}  // namespace mtlfault::simd::avx2
