// SPDX-License-Identifier: Apache-2.0
// AArch64 Advanced SIMD variant. Two double lanes per register.
#include <arm_neon.h>

#include <limits>

#include "flashvit/kernels.hpp"

namespace flashvit::kernels {

namespace {

constexpr std::size_t kLanes = 2;
constexpr std::size_t kBlock = 4;

struct Acc {
  float64x2_t best;
  float64x2_t arg_pos;
  float64x2_t arg_row;
};

inline void relax(Acc& acc, float64x2_t cand, float64x2_t pos, float64x2_t row) {
  const uint64x2_t gt = vcgtq_f64(cand, acc.best);
  const uint64x2_t eq = vceqq_f64(cand, acc.best);
  const uint64x2_t lower = vcltq_f64(row, acc.arg_row);
  const uint64x2_t take = vorrq_u64(gt, vandq_u64(eq, lower));
  acc.best = vbslq_f64(take, cand, acc.best);
  acc.arg_pos = vbslq_f64(take, pos, acc.arg_pos);
  acc.arg_row = vbslq_f64(take, row, acc.arg_row);
}

template <std::size_t Vectors>
void run_block(const MaxPlusArgs& a, std::size_t offset) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Acc acc[Vectors];
  for (auto& x : acc) {
    x.best = vdupq_n_f64(kNegInf);
    x.arg_pos = vdupq_n_f64(-1.0);
    x.arg_row = vdupq_n_f64(-1.0);
  }
  for (std::size_t j = 0; j < a.source_count; ++j) {
    const double score = a.source_scores[j];
    if (score == kNegInf) continue;
    const std::int32_t row =
        a.source_rows != nullptr ? a.source_rows[j] : static_cast<std::int32_t>(j);
    const double* trans_row = a.trans + static_cast<std::size_t>(row) * a.stride + offset;
    const float64x2_t vscore = vdupq_n_f64(score);
    const float64x2_t vpos = vdupq_n_f64(static_cast<double>(j));
    const float64x2_t vrow = vdupq_n_f64(static_cast<double>(row));
    for (std::size_t v = 0; v < Vectors; ++v) {
      relax(acc[v], vaddq_f64(vscore, vld1q_f64(trans_row + v * kLanes)), vpos, vrow);
    }
  }
  for (std::size_t v = 0; v < Vectors; ++v) {
    const std::size_t lane = offset + v * kLanes;
    float64x2_t out = acc[v].best;
    if (a.emit != nullptr) out = vaddq_f64(out, vld1q_f64(a.emit + lane));
    vst1q_f64(a.best + lane, out);
    vst1_s32(a.arg + lane, vmovn_s64(vcvtq_s64_f64(acc[v].arg_pos)));
  }
}

}  // namespace

void max_plus_neon(const MaxPlusArgs& a) {
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
