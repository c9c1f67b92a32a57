// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace flashvit {

using StateIndex = std::int32_t;
using Symbol = std::int32_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr StateIndex kUnsetState = -1;

/// Tolerance on logsumexp(row) == 0 for every normalized distribution.
inline constexpr double kNormalizationTolerance = 1e-9;

double logsumexp(std::span<const double> values);

/// Discrete-emission HMM stored in natural-log domain. Sparse transitions are
/// NEG_INF entries in a dense K x K matrix. Immutable once constructed.
class HmmModel {
 public:
  /// Validates every invariant and throws FormatError naming the offending
  /// field on failure. Matrices are row-major.
  HmmModel(std::size_t num_states, std::size_t num_symbols,
           std::vector<double> log_initial, std::vector<double> log_transition,
           std::vector<double> log_emission);

  /// Builds from linear-domain probabilities (zeros become NEG_INF).
  static HmmModel from_probabilities(std::size_t num_states,
                                     std::size_t num_symbols,
                                     std::span<const double> initial,
                                     std::span<const double> transition,
                                     std::span<const double> emission);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_symbols() const { return num_symbols_; }

  std::span<const double> log_initial() const { return log_initial_; }
  std::span<const double> log_transition() const { return log_transition_; }
  std::span<const double> log_emission() const { return log_emission_; }

  double initial(StateIndex i) const { return log_initial_[static_cast<std::size_t>(i)]; }
  double transition(StateIndex from, StateIndex to) const {
    return log_transition_[static_cast<std::size_t>(from) * num_states_ +
                           static_cast<std::size_t>(to)];
  }
  double emission(StateIndex state, Symbol symbol) const {
    return log_emission_[static_cast<std::size_t>(state) * num_symbols_ +
                         static_cast<std::size_t>(symbol)];
  }

  /// Row `from` of the transition matrix, contiguous over destination states.
  std::span<const double> transition_row(StateIndex from) const {
    return {log_transition_.data() + static_cast<std::size_t>(from) * num_states_,
            num_states_};
  }
  /// log B[., symbol] laid out contiguously over states.
  std::span<const double> emission_column(Symbol symbol) const {
    return {emission_by_symbol_.data() + static_cast<std::size_t>(symbol) * num_states_,
            num_states_};
  }

  bool operator==(const HmmModel& other) const;

 private:
  std::size_t num_states_;
  std::size_t num_symbols_;
  std::vector<double> log_initial_;
  std::vector<double> log_transition_;
  std::vector<double> log_emission_;
  std::vector<double> emission_by_symbol_;  // M x K transpose of log_emission_
};

class ObservationSequence {
 public:
  ObservationSequence() = default;
  explicit ObservationSequence(std::vector<Symbol> symbols);

  std::size_t size() const { return symbols_.size(); }
  Symbol operator[](std::size_t t) const { return symbols_[t]; }
  std::span<const Symbol> symbols() const { return symbols_; }

  /// Throws FormatError if empty or any symbol is outside [0, num_symbols).
  void validate_against(const HmmModel& model) const;

  bool operator==(const ObservationSequence&) const = default;

 private:
  std::vector<Symbol> symbols_;
};

struct GeneratorConfig {
  std::size_t num_states = 512;
  std::size_t num_symbols = 50;
  std::size_t seq_len = 512;
  double edge_prob = 0.253;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Erdos-Renyi transition graph with Uniform(0,1) edge weights, row-normalized.
/// Rows without any sampled edge get a self-loop. Deterministic in `seed`.
HmmModel generate_er_hmm(const GeneratorConfig& config);

/// Number of (i, j) pairs that received an edge from the Bernoulli draws,
/// excluding self-loops added by the dead-end fallback. Replays the same
/// random stream as generate_er_hmm.
std::size_t count_sampled_edges(const GeneratorConfig& config);

/// Runs the chain for `length` steps and records the emitted symbols.
ObservationSequence sample_observations(const HmmModel& model, std::size_t length,
                                        std::uint64_t seed);

/// Derives an independent stream seed from a master seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

void save_model(const HmmModel& model, const std::filesystem::path& path);
HmmModel load_model(const std::filesystem::path& path);

void save_observations(const ObservationSequence& obs, const std::filesystem::path& path);
ObservationSequence load_observations(const std::filesystem::path& path);

}  // namespace flashvit
