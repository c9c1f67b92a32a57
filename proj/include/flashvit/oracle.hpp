// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flashvit/hmm_model.hpp"
#include "flashvit/metering.hpp"

namespace flashvit {

/// A decoded state sequence and its joint log-likelihood with the observations.
struct DecodedPath {
  std::vector<StateIndex> states;
  double log_likelihood = kNegInf;
};

/// log pi(s0) + sum log B + sum log A along `states`; NEG_INF if any factor is
/// absent. Throws ConfigError on a length or index mismatch.
double path_score(const HmmModel& model, const ObservationSequence& obs,
                  std::span<const StateIndex> states);

/// Textbook log-domain Viterbi retaining the full K x T backpointer table.
/// Every argmax picks the lowest state index among ties.
DecodedPath vanilla_viterbi(const HmmModel& model, const ObservationSequence& obs,
                            Meter* meter = nullptr);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Scores all K^T sequences. Among maximizers it returns the one that is
/// smallest when compared from the last timestep backward, matching
/// lowest-index argmax with backtracking. Refuses with
/// EnumerationCapExceeded when K^T > cap.
DecodedPath brute_force_decode(const HmmModel& model, const ObservationSequence& obs,
                               std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace flashvit
