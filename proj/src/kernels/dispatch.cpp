// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "flashvit/errors.hpp"
#include "flashvit/kernels.hpp"

namespace flashvit::kernels {

namespace {

bool cpu_supports(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(FLASHVIT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(FLASHVIT_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect() {
  if (const char* env = std::getenv("FLASHVIT_BACKEND")) {
    const std::string name(env);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (name == backend_name(b) && cpu_supports(b)) return b;
    }
  }
  if (cpu_supports(Backend::kAvx2)) return Backend::kAvx2;
  if (cpu_supports(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
    if (cpu_supports(b)) out.push_back(b);
  }
  return out;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!cpu_supports(backend)) {
    throw ConfigError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this machine");
  }
  current().store(backend, std::memory_order_relaxed);
}

void max_plus(const MaxPlusArgs& args) {
  switch (active_backend()) {
#if defined(FLASHVIT_HAVE_AVX2)
    case Backend::kAvx2:
      max_plus_avx2(args);
      return;
#endif
#if defined(FLASHVIT_HAVE_NEON)
    case Backend::kNeon:
      max_plus_neon(args);
      return;
#endif
    default:
      max_plus_scalar(args);
      return;
  }
}

}  // namespace flashvit::kernels
