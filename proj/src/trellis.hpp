// SPDX-License-Identifier: Apache-2.0
#pragma once

// Column-level helpers shared by the decoders. Internal header.

#include <span>
#include <string>

#include "flashvit/errors.hpp"
#include "flashvit/hmm_model.hpp"
#include "flashvit/kernels.hpp"

namespace flashvit::detail {

/// out[i] = log pi(i) + log B(i, x0)
inline void init_from_prior(const HmmModel& model, Symbol x0, std::span<double> out) {
  const auto emit = model.emission_column(x0);
  const auto prior = model.log_initial();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = prior[i] + emit[i];
}

/// out[i] = log A(from, i) + log B(i, x): the pruned re-initialization that
/// starts a segment from one known state with its own score dropped.
inline void init_from_state(const HmmModel& model, StateIndex from, Symbol x,
                            std::span<double> out) {
  const auto row = model.transition_row(from);
  const auto emit = model.emission_column(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row[i] + emit[i];
}

/// Full K x K relaxation: out = max-plus(prev, A) + B(., x), arg = argmax.
inline void relax_dense(const HmmModel& model, std::span<const double> prev, Symbol x,
                        std::span<double> out, std::span<StateIndex> arg) {
  kernels::MaxPlusArgs a;
  a.source_scores = prev.data();
  a.source_count = prev.size();
  a.trans = model.log_transition().data();
  a.stride = model.num_states();
  a.width = model.num_states();
  a.emit = model.emission_column(x).data();
  a.best = out.data();
  a.arg = arg.data();
  kernels::max_plus(a);
}

/// Lowest index attaining the maximum; -1 if every entry is -inf.
inline StateIndex argmax_lowest(std::span<const double> values) {
  StateIndex best = kUnsetState;
  double best_value = kNegInf;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > best_value) {
      best_value = values[i];
      best = static_cast<StateIndex>(i);
    }
  }
  return best;
}

inline bool all_absent(std::span<const double> values) {
  for (double v : values) {
    if (v != kNegInf) return false;
  }
  return true;
}

[[noreturn]] inline void throw_infeasible(std::size_t t) {
  throw InfeasibleDecode("no path with nonzero probability reaches timestep " +
                         std::to_string(t));
}

}  // namespace flashvit::detail
