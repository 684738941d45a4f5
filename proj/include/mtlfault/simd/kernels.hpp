#pragma once

// Data-parallel inner loops used by the feature, network and kernel-matrix
// code. Each kernel has a scalar reference and an AVX2 variant; the active
// variant is picked once at startup from CPUID.
//
// The floating-point kernels accumulate in four interleaved lanes and reduce
// them as (l0 + l2) + (l1 + l3), followed by a sequential tail. The scalar
// reference follows the same order, so every backend returns bit-identical
// results and switching backends never changes pipeline output.

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace mtlfault::simd {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // out[i] = (in[i] * levels) >> 8, levels in [2, 256]
  void (*quantize_u8)(const std::uint8_t* in, std::uint8_t* out, std::size_t n, unsigned levels);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void quantize_u8(const std::uint8_t* in, std::uint8_t* out, std::size_t n, unsigned levels);
}  // namespace scalar

#if defined(MTLFAULT_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void quantize_u8(const std::uint8_t* in, std::uint8_t* out, std::size_t n, unsigned levels);
}  // namespace avx2
#endif

/// True when `b` is compiled in and supported by the running CPU.
bool backend_available(Backend b);

/// Best available backend on this machine.
Backend detect_backend();

Backend active_backend();

/// Forces a backend (tests and benchmarking). Throws if unavailable.
void set_backend(Backend b);

std::string_view backend_name(Backend b);

const KernelTable& kernels();

// Spans must have equal length.
inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return kernels().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return kernels().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace mtlfault::simd
