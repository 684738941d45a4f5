#include <atomic>
#include <stdexcept>
#include <string>

#include "mtlfault/simd/kernels.hpp"

namespace mtlfault::simd {

namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::squared_distance, &scalar::quantize_u8};
#if defined(MTLFAULT_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::squared_distance, &avx2::quantize_u8};
#endif

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &kScalarTable;
    case Backend::kAvx2:
#if defined(MTLFAULT_HAVE_AVX2)
      return &kAvx2Table;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{detect_backend()};
  return backend;
}

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(MTLFAULT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Backend detect_backend() {
  return backend_available(Backend::kAvx2) ? Backend::kAvx2 : Backend::kScalar;
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::runtime_error("simd backend not available: " + std::string(backend_name(b)));
  }
  active().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels() { return *table_for(active_backend()); }

}  // namespace mtlfault::simd
