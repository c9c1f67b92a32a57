// SPDX-License-Identifier: Apache-2.0
// Compiled with -mavx2; only called after a runtime CPU check.
#include <immintrin.h>

#include <limits>

#include "flashvit/kernels.hpp"

namespace flashvit::kernels {

namespace {

constexpr std::size_t kLanes = 4;
constexpr std::size_t kBlock = 4;  // vectors per register block

// Lane-wise winner bookkeeping. arg_row mirrors source_rows[arg_pos] so the
// tie rule needs no gather; both start at -1.
struct Acc {
  __m256d best;
  __m256d arg_pos;
  __m256d arg_row;
};

inline void relax(Acc& acc, __m256d cand, __m256d pos, __m256d row) {
  const __m256d gt = _mm256_cmp_pd(cand, acc.best, _CMP_GT_OQ);
  const __m256d eq = _mm256_cmp_pd(cand, acc.best, _CMP_EQ_OQ);
  const __m256d lower = _mm256_cmp_pd(row, acc.arg_row, _CMP_LT_OQ);
  const __m256d take = _mm256_or_pd(gt, _mm256_and_pd(eq, lower));
  acc.best = _mm256_blendv_pd(acc.best, cand, take);
  acc.arg_pos = _mm256_blendv_pd(acc.arg_pos, pos, take);
  acc.arg_row = _mm256_blendv_pd(acc.arg_row, row, take);
}

inline void finish(const Acc& acc, const double* emit, double* best, std::int32_t* arg) {
  __m256d out = acc.best;
  if (emit != nullptr) out = _mm256_add_pd(out, _mm256_loadu_pd(emit));
  _mm256_storeu_pd(best, out);
  _mm_storeu_si128(reinterpret_cast<__m128i*>(arg), _mm256_cvtpd_epi32(acc.arg_pos));
}

template <std::size_t Vectors>
void run_block(const MaxPlusArgs& a, std::size_t offset) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Acc acc[Vectors];
  for (auto& x : acc) {
    x.best = _mm256_set1_pd(kNegInf);
    x.arg_pos = _mm256_set1_pd(-1.0);
    x.arg_row = _mm256_set1_pd(-1.0);
  }
  for (std::size_t j = 0; j < a.source_count; ++j) {
    const double score = a.source_scores[j];
    if (score == kNegInf) continue;
    const std::int32_t row =
        a.source_rows != nullptr ? a.source_rows[j] : static_cast<std::int32_t>(j);
    const double* trans_row = a.trans + static_cast<std::size_t>(row) * a.stride + offset;
    const __m256d vscore = _mm256_set1_pd(score);
    const __m256d vpos = _mm256_set1_pd(static_cast<double>(j));
    const __m256d vrow = _mm256_set1_pd(static_cast<double>(row));
    for (std::size_t v = 0; v < Vectors; ++v) {
      const __m256d cand = _mm256_add_pd(vscore, _mm256_loadu_pd(trans_row + v * kLanes));
      relax(acc[v], cand, vpos, vrow);
    }
  }
  for (std::size_t v = 0; v < Vectors; ++v) {
    const std::size_t lane = offset + v * kLanes;
    finish(acc[v], a.emit != nullptr ? a.emit + lane : nullptr, a.best + lane, a.arg + lane);
  }
}

}  // namespace

void max_plus_avx2(const MaxPlusArgs& a) {
  std::size_t offset = 0;
  for (; offset + kBlock * kLanes <= a.width; offset += kBlock * kLanes) {
    run_block<kBlock>(a, offset);
  }
  for (; offset + kLanes <= a.width; offset += kLanes) run_block<1>(a, offset);
  if (offset < a.width) {
    MaxPlusArgs tail = a;
    tail.trans = a.trans + offset;
    tail.width = a.width - offset;
    tail.emit = a.emit != nullptr ? a.emit + offset : nullptr;
    tail.best = a.best + offset;
    tail.arg = a.arg + offset;
    max_plus_scalar(tail);
  }
}

}  // namespace flashvit::kernels
