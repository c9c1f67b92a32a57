// SPDX-License-Identifier: Apache-2.0
#pragma once

// Max-plus transition kernel shared by every decoder, with a scalar reference
// implementation and SIMD variants chosen at runtime. All variants perform the
// same IEEE additions and comparisons in the same per-lane order, so results
// are bit-identical across backends.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace flashvit::kernels {

/// One relaxation of a trellis column over a tile of destination states.
///
/// For every destination lane i in [0, width):
///   best[i] = max_j (source_scores[j] + trans[source_rows[j] * stride + i]) + emit[i]
///   arg[i]  = the source position j attaining the max
///
/// Sources whose score is -inf are skipped. Among equal candidates the source
/// with the smaller row id wins, so the result does not depend on the order of
/// the source list. A lane with no finite candidate gets best = -inf and
/// arg = -1. `source_rows == nullptr` means row id j for source j. `emit` may
/// be null. `trans` points at the first destination column of the tile.
struct MaxPlusArgs {
  const double* source_scores = nullptr;
  const std::int32_t* source_rows = nullptr;
  std::size_t source_count = 0;
  const double* trans = nullptr;
  std::size_t stride = 0;
  std::size_t width = 0;
  const double* emit = nullptr;
  double* best = nullptr;
  std::int32_t* arg = nullptr;
};

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend);

/// Backends compiled into this binary and supported by the running CPU.
std::vector<Backend> available_backends();

/// Backend used by max_plus(). Defaults to the best available one; the
/// FLASHVIT_BACKEND environment variable (scalar|avx2|neon) overrides it.
Backend active_backend();
/// Throws ConfigError if the backend is unavailable.
void set_backend(Backend backend);

void max_plus(const MaxPlusArgs& args);

void max_plus_scalar(const MaxPlusArgs& args);
#if defined(FLASHVIT_HAVE_AVX2)
void max_plus_avx2(const MaxPlusArgs& args);
#endif
#if defined(FLASHVIT_HAVE_NEON)
void max_plus_neon(const MaxPlusArgs& args);
#endif

}  // namespace flashvit::kernels
