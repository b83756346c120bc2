#include <atomic>
#include <cstdlib>
#include <cstring>

#include "tenseg/errors.hpp"
#include "tenseg/kernels/kernels.hpp"

namespace tenseg::kernels {

const KernelTable* avx2_kernels_impl();  // defined in kernels_avx2.cpp

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
  return cpu_supports_avx2() ? avx2_kernels_impl() : nullptr;
}

namespace {

std::atomic<const KernelTable*> g_forced{nullptr};

const KernelTable* select_default() {
  if (const char* env = std::getenv("TENSEG_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (std::strcmp(env, "avx2") == 0 && avx2_kernels()) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  if (const KernelTable* forced = g_forced.load(std::memory_order_acquire)) {
    return *forced;
  }
  static const KernelTable* selected = select_default();
  return *selected;
}

void force_kernels(const char* name) {
  if (std::strcmp(name, "auto") == 0) {
    g_forced.store(nullptr, std::memory_order_release);
    return;
  }
  if (std::strcmp(name, "scalar") == 0) {
    g_forced.store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  if (std::strcmp(name, "avx2") == 0) {
    if (const KernelTable* t = avx2_kernels()) {
      g_forced.store(t, std::memory_order_release);
      return;
    }
    throw InvalidArgumentError("force_kernels: avx2 not available on this CPU/build");
  }
  throw InvalidArgumentError(std::string("force_kernels: unknown table '") + name + "'");
}

}  // namespace tenseg::kernels
