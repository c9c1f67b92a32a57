// SPDX-License-Identifier: Apache-2.0
#include "flashvit/oracle.hpp"

#include <string>

#include "flashvit/errors.hpp"
#include "trellis.hpp"

namespace flashvit {

double path_score(const HmmModel& model, const ObservationSequence& obs,
                  std::span<const StateIndex> states) {
  if (states.size() != obs.size()) {
    throw ConfigError("path length " + std::to_string(states.size()) +
                      " does not match observation length " + std::to_string(obs.size()));
  }
  const auto k = static_cast<StateIndex>(model.num_states());
  for (StateIndex s : states) {
    if (s < 0 || s >= k) throw ConfigError("path state index out of range");
  }
  if (states.empty()) return 0.0;
  double score = model.initial(states[0]) + model.emission(states[0], obs[0]);
  for (std::size_t t = 1; t < states.size(); ++t) {
    score += model.transition(states[t - 1], states[t]);
    score += model.emission(states[t], obs[t]);
  }
  return score;
}

DecodedPath vanilla_viterbi(const HmmModel& model, const ObservationSequence& obs,
                            Meter* meter) {
  obs.validate_against(model);
  const std::size_t k = model.num_states();
  const std::size_t len = obs.size();

  TrackedBuffer<double> prev(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<double> cur(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<StateIndex> psi(meter, MemoryCategory::kPsiTable, k * len, kUnsetState);

  detail::init_from_prior(model, obs[0], prev.span());
  if (meter != nullptr) meter->add_updates(k);
  if (detail::all_absent(prev.span())) detail::throw_infeasible(0);

  for (std::size_t t = 1; t < len; ++t) {
    detail::relax_dense(model, prev.span(), obs[t], cur.span(),
                        {psi.data() + t * k, k});
    if (meter != nullptr) meter->add_updates(k * k);
    if (detail::all_absent(cur.span())) detail::throw_infeasible(t);
    swap(prev, cur);
  }

  DecodedPath path;
  path.states.resize(len);
  path.states[len - 1] = detail::argmax_lowest(prev.span());
  for (std::size_t t = len - 1; t > 0; --t) {
    path.states[t - 1] = psi[t * k + static_cast<std::size_t>(path.states[t])];
  }
  path.log_likelihood = path_score(model, obs, path.states);
  return path;
}

DecodedPath brute_force_decode(const HmmModel& model, const ObservationSequence& obs,
                               std::uint64_t cap) {
  obs.validate_against(model);
  const std::size_t k = model.num_states();
  const std::size_t len = obs.size();

  std::uint64_t combos = 1;
  for (std::size_t t = 0; t < len; ++t) {
    if (combos > cap / k) {
      throw EnumerationCapExceeded("K^T exceeds enumeration cap of " + std::to_string(cap));
    }
    combos *= k;
  }
  if (combos > cap) {
    throw EnumerationCapExceeded("K^T exceeds enumeration cap of " + std::to_string(cap));
  }

  // Odometer with the first timestep turning fastest, so sequences are visited
  // in lexicographic order of their reversal. Strict improvement keeps the
  // first maximizer in that order, which is the one lowest-index backtracking
  // selects: smallest final state, then smallest predecessor, and so on.
  std::vector<StateIndex> current(len, 0);
  DecodedPath best;
  best.states = current;
  best.log_likelihood = kNegInf;
  for (std::uint64_t n = 0; n < combos; ++n) {
    const double score = path_score(model, obs, current);
    if (score > best.log_likelihood) {
      best.log_likelihood = score;
      best.states = current;
    }
    for (std::size_t pos = 0; pos < len; ++pos) {
      if (static_cast<std::size_t>(++current[pos]) < k) break;
      current[pos] = 0;
    }
  }
  if (best.log_likelihood == kNegInf) detail::throw_infeasible(len - 1);
  return best;
}

}  // namespace flashvit
