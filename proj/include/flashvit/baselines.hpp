// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "flashvit/hmm_model.hpp"
#include "flashvit/metering.hpp"
#include "flashvit/oracle.hpp"

namespace flashvit {

/// Interval layout used by checkpoint_viterbi: ceil(sqrt(T)) target intervals
/// of equal length, the last one possibly shorter.
struct CheckpointLayout {
  std::size_t interval_length = 1;
  std::size_t num_checkpoints = 1;
};
CheckpointLayout checkpoint_layout(std::size_t seq_len);

/// Forward pass keeps only the delta column at the start of each interval;
/// traceback recomputes backpointers one interval at a time.
DecodedPath checkpoint_viterbi(const HmmModel& model, const ObservationSequence& obs,
                               Meter* meter = nullptr);

/// Recursive midpoint divide-and-conquer without pruning. Each call receives
/// the exact delta column preceding its segment, emits its midpoint state and
/// recurses left then right. Recursion depth is charged to the meter as
/// kRecursionFrameBytes per live frame.
DecodedPath sieve_mp_decode(const HmmModel& model, const ObservationSequence& obs,
                            Meter* meter = nullptr);

/// Static beam: computes every candidate of a timestep into a K-wide column,
/// then discards all but the top `beam_width`. Keeps the full backpointer
/// table. Throws BeamExhausted when the retained set has no finite successor.
DecodedPath static_beam_decode(const HmmModel& model, const ObservationSequence& obs,
                               std::size_t beam_width, Meter* meter = nullptr);

}  // namespace flashvit
