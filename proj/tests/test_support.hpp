// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for the unit tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "flashvit/hmm_model.hpp"

namespace flashvit::testing {

/// Two-state model with pi = (0.6, 0.4), A = [[0.7, 0.3], [0.4, 0.6]],
/// B = [[0.9, 0.1], [0.2, 0.8]].
inline HmmModel h2_model() {
  const double pi[] = {0.6, 0.4};
  const double a[] = {0.7, 0.3, 0.4, 0.6};
  const double b[] = {0.9, 0.1, 0.2, 0.8};
  return HmmModel::from_probabilities(2, 2, pi, a, b);
}

/// pi = e_0, A = I, B = I: every decode is forced onto state 0 for symbol 0.
inline HmmModel identity_model(std::size_t k = 2) {
  std::vector<double> pi(k, 0.0), a(k * k, 0.0), b(k * k, 0.0);
  pi[0] = 1.0;
  for (std::size_t i = 0; i < k; ++i) a[i * k + i] = b[i * k + i] = 1.0;
  return HmmModel::from_probabilities(k, k, pi, a, b);
}

/// State 0 wins timestep 0 but its only successor cannot emit symbol 1;
/// state 1 leads to state 2, which can. Decoding [0, 1] with B = 1 collapses.
inline HmmModel greedy_trap_model() {
  const double pi[] = {0.6, 0.4, 0.0};
  const double a[] = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0};
  const double b[] = {1.0, 0.0, 0.5, 0.5, 0.0, 1.0};
  return HmmModel::from_probabilities(3, 2, pi, a, b);
}

struct Instance {
  HmmModel model;
  ObservationSequence obs;
};

inline Instance make_instance(std::size_t k, std::size_t m, std::size_t t, double p,
                              std::uint64_t seed) {
  GeneratorConfig config;
  config.num_states = k;
  config.num_symbols = m;
  config.seq_len = t;
  config.edge_prob = p;
  config.seed = seed;
  HmmModel model = generate_er_hmm(config);
  ObservationSequence obs = sample_observations(model, t, derive_seed(seed, 1));
  return {std::move(model), std::move(obs)};
}

/// Random small instance drawn from a parameter stream: K in [kmin, kmax],
/// T in [tmin, tmax], p from {0.1, 0.3, 1.0}, M in [2, 6].
inline Instance random_instance(std::mt19937_64& rng, std::size_t kmin, std::size_t kmax,
                                std::size_t tmin, std::size_t tmax) {
  static constexpr double kProbs[] = {0.1, 0.3, 1.0};
  const std::size_t k = std::uniform_int_distribution<std::size_t>(kmin, kmax)(rng);
  const std::size_t t = std::uniform_int_distribution<std::size_t>(tmin, tmax)(rng);
  const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
  const double p = kProbs[std::uniform_int_distribution<int>(0, 2)(rng)];
  return make_instance(k, m, t, p, rng());
}

/// True when exactly one state per timestep lies on a path scoring within
/// `margin` of the optimum, i.e. the optimal path is unique beyond rounding
/// noise. Max-product forward and backward passes give, for every (t, i), the
/// best score of any path through state i at t.
inline bool optimum_is_unique(const HmmModel& m, const ObservationSequence& obs, double margin) {
  const std::size_t k = m.num_states();
  const std::size_t len = obs.size();
  std::vector<double> fwd(len * k, kNegInf), bwd(len * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    fwd[i] = m.initial(static_cast<StateIndex>(i)) + m.emission(static_cast<StateIndex>(i), obs[0]);
  }
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      double best = kNegInf;
      for (std::size_t j = 0; j < k; ++j) {
        best = std::max(best, fwd[(t - 1) * k + j] + m.transition(static_cast<StateIndex>(j), static_cast<StateIndex>(i)));
      }
      fwd[t * k + i] = best + m.emission(static_cast<StateIndex>(i), obs[t]);
    }
  }
  for (std::size_t t = len - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      double best = kNegInf;
      for (std::size_t j = 0; j < k; ++j) {
        best = std::max(best, m.transition(static_cast<StateIndex>(i), static_cast<StateIndex>(j)) +
                                  m.emission(static_cast<StateIndex>(j), obs[t + 1]) + bwd[(t + 1) * k + j]);
      }
      bwd[t * k + i] = best;
    }
  }
  double opt = kNegInf;
  for (std::size_t i = 0; i < k; ++i) opt = std::max(opt, fwd[i] + bwd[i]);
  for (std::size_t t = 0; t < len; ++t) {
    std::size_t near = 0;
    for (std::size_t i = 0; i < k; ++i) near += fwd[t * k + i] + bwd[t * k + i] >= opt - margin ? 1 : 0;
    if (near != 1) return false;
  }
  return true;
}

}  // namespace flashvit::testing
