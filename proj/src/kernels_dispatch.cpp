#include "rul/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace rul::kernels {
namespace {

std::atomic<const Backend*> g_active{nullptr};

const Backend* best_supported() {
#if defined(__x86_64__) || defined(__i386__)
  if (avx2_supported()) {
    return &avx2_backend();
  }
#endif
#if defined(__aarch64__)
  return &neon_backend();
#endif
  return &scalar_backend();
}

const Backend* resolve(std::string_view name) {
  if (name == "auto") {
    return best_supported();
  }
  if (name == "scalar") {
    return &scalar_backend();
  }
#if defined(__x86_64__) || defined(__i386__)
  if (name == "avx2" && avx2_supported()) {
    return &avx2_backend();
  }
#endif
#if defined(__aarch64__)
  if (name == "neon") {
    return &neon_backend();
  }
#endif
  return nullptr;
}

const Backend* initial_backend() {
  if (const char* env = std::getenv("RUL_KERNELS"); env != nullptr && *env) {
    if (const Backend* b = resolve(env)) {
      return b;
    }
  }
  return best_supported();
}

}  // namespace

#if defined(__x86_64__) || defined(__i386__)
bool avx2_supported() {
  return __builtin_cpu_supports("avx2") != 0;
}
#endif

const Backend& active() {
  const Backend* b = g_active.load(std::memory_order_acquire);
  if (b == nullptr) {
    b = initial_backend();
    g_active.store(b, std::memory_order_release);
  }
  return *b;
}

bool select(std::string_view name) {
  const Backend* b = resolve(name);
  if (b == nullptr) {
    return false;
  }
  g_active.store(b, std::memory_order_release);
  return true;
}

std::vector<std::string> available() {
  std::vector<std::string> names{"scalar"};
#if defined(__x86_64__) || defined(__i386__)
  if (avx2_supported()) {
    names.emplace_back("avx2");
  }
#endif
#if defined(__aarch64__)
  names.emplace_back("neon");
#endif
  return names;
}

}  // namespace rul::kernels
