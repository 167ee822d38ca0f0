#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ipp3d/simd/kernels.hpp"

namespace ipp3d::simd {
namespace {

Backend detect() {
  if (const char* env = std::getenv("IPP3D_SIMD")) {
    if (std::string(env) == "scalar") return Backend::kScalar;
  }
#if defined(IPP3D_HAVE_AVX2)
  if (backend_available(Backend::kAvx2)) return Backend::kAvx2;
#endif
#if defined(IPP3D_HAVE_NEON)
  return Backend::kNeon;
#endif
  return Backend::kScalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::kScalar};

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(IPP3D_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(IPP3D_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& kernels(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("SIMD backend not available: " +
                                std::string(backend_name(b)));
  }
  switch (b) {
#if defined(IPP3D_HAVE_AVX2)
    case Backend::kAvx2:
      return detail::avx2_table();
#endif
#if defined(IPP3D_HAVE_NEON)
    case Backend::kNeon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

void set_backend(Backend b) {
  g_active.store(&kernels(b));
  g_backend.store(b);
}

Backend active_backend() {
  kernels();
  return g_backend.load();
}

const KernelTable& kernels() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Backend b = detect();
    t = &kernels(b);
    g_backend.store(b);
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace ipp3d::simd
