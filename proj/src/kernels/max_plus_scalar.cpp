// SPDX-License-Identifier: Apache-2.0
#include <limits>

#include "flashvit/kernels.hpp"

namespace flashvit::kernels {

void max_plus_scalar(const MaxPlusArgs& a) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.width; ++i) {
    a.best[i] = kNegInf;
    a.arg[i] = -1;
  }
  for (std::size_t j = 0; j < a.source_count; ++j) {
    const double score = a.source_scores[j];
    if (score == kNegInf) continue;
    const std::int32_t row =
        a.source_rows != nullptr ? a.source_rows[j] : static_cast<std::int32_t>(j);
    const double* trans_row = a.trans + static_cast<std::size_t>(row) * a.stride;
    for (std::size_t i = 0; i < a.width; ++i) {
      const double cand = score + trans_row[i];
      if (cand > a.best[i]) {
        a.best[i] = cand;
        a.arg[i] = static_cast<std::int32_t>(j);
      } else if (cand == a.best[i] && a.arg[i] >= 0) {
        const std::int32_t incumbent =
            a.source_rows != nullptr ? a.source_rows[a.arg[i]] : a.arg[i];
        if (row < incumbent) a.arg[i] = static_cast<std::int32_t>(j);
      }
    }
  }
  if (a.emit != nullptr) {
    for (std::size_t i = 0; i < a.width; ++i) a.best[i] += a.emit[i];
  }
}

}  // namespace flashvit::kernels
