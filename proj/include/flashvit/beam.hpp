// SPDX-License-Identifier: Apache-2.0
#pragma once

// FLASH-BS: the FLASH scheduler with each task's K-wide DP column replaced by
// a pair of capacity-B min-heaps that swap roles every timestep.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "flashvit/flash.hpp"
#include "flashvit/hmm_model.hpp"
#include "flashvit/metering.hpp"
#include "flashvit/oracle.hpp"

namespace flashvit {

struct BeamElement {
  StateIndex state = kUnsetState;
  double opt_prob = kNegInf;
  std::vector<StateIndex> mid_states;
};

/// Fixed-capacity min-heap keyed on opt_prob. Elements are stored inline
/// (score, state and mid_states side by side per slot), so exchanging two
/// heaps is a handle swap.
///
/// Insertion follows a three-case rule: below B-1 elements the buffer is
/// filled unordered; the B-th insert heapifies; once full a candidate
/// replaces the root only if its score is strictly higher.
class BeamHeap {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  BeamHeap(std::size_t capacity, std::size_t mid_slots, Meter* meter = nullptr);

  /// Logical footprint of one element: score, state and mid_slots indices.
  static std::size_t element_bytes(std::size_t mid_slots) {
    return kProbBytes + kStateBytes + kStateBytes * mid_slots;
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t mid_slots() const { return mid_slots_; }
  /// True once the buffer reached capacity and is kept in heap order.
  bool heap_ordered() const { return size_ == capacity_; }
  /// Candidates dropped (rejected or evicted) since the last clear().
  std::size_t dropped() const { return dropped_; }

  /// Returns true if the element was kept.
  bool push(double opt_prob, StateIndex state, std::span<const StateIndex> mids);
  void clear() {
    size_ = 0;
    dropped_ = 0;
  }

  const double* keys() const { return keys_.data(); }
  const StateIndex* states() const { return states_.data(); }
  double key(std::size_t slot) const { return keys_[slot]; }
  StateIndex state(std::size_t slot) const { return states_[slot]; }
  std::span<const StateIndex> mids(std::size_t slot) const {
    return {mids_.data() + slot * mid_slots_, mid_slots_};
  }
  BeamElement element(std::size_t slot) const;

  /// Slot holding `state`, or npos.
  std::size_t find_state(StateIndex state) const;
  /// Slot with the highest score, lowest state among ties; npos if empty.
  std::size_t best_slot() const;
  /// Heap-order audit; vacuously true during the unordered fill phase.
  bool satisfies_heap_property() const;

  friend void swap(BeamHeap& a, BeamHeap& b) noexcept;

 private:
  bool worse(std::size_t a, std::size_t b) const {
    return keys_[a] < keys_[b] || (keys_[a] == keys_[b] && states_[a] > states_[b]);
  }
  void swap_slots(std::size_t a, std::size_t b);
  void sift_down(std::size_t slot);
  void write_slot(std::size_t slot, double key, StateIndex state, std::span<const StateIndex> mids);

  std::size_t capacity_;
  std::size_t mid_slots_;
  std::size_t size_ = 0;
  std::size_t dropped_ = 0;
  std::vector<double> keys_;
  std::vector<StateIndex> states_;
  std::vector<StateIndex> mids_;
  MeterCharge charge_;
};

/// Inserts `element` following the heap's three-case rule; ties with the
/// root keep the incumbent.
bool beam_push(BeamHeap& heap, const BeamElement& element);

/// Destination states are relaxed in fixed-width tiles so the transient
/// candidate buffer never depends on K.
inline constexpr std::size_t kBeamTileWidth = 64;

struct BeamTile {
  BeamTile(std::size_t mid_slots, Meter* meter);

  TrackedBuffer<double> best;
  TrackedBuffer<StateIndex> arg;
  TrackedBuffer<StateIndex> mids;
};

/// Relaxes timestep t from `heap_pre` into `heap_total` (cleared first).
/// Only transitions out of the retained states are evaluated; each finite
/// candidate inherits mid_states by the copy-then-compose rule. Throws
/// BeamExhausted if no destination state has a finite score.
void beam_step(const HmmModel& model, Symbol symbol, std::size_t t,
               std::span<const std::size_t> division_points, const BeamHeap& heap_pre,
               BeamHeap& heap_total, BeamTile& tile, Meter* meter = nullptr);

/// FLASH-BS decode with P workers and beam width B. Subtask traceback looks
/// up the known end state in the final beam; when it fell out of the beam the
/// best element is used instead and the meter records an inexact traceback.
DecodedPath flash_bs_decode(const HmmModel& model, const ObservationSequence& obs,
                            std::size_t parallelism, std::size_t beam_width,
                            Meter* meter = nullptr, const SchedulerHooks& hooks = {});

/// |opt - beam| / |opt|. Throws ConfigError when opt is zero or not finite.
double relative_error(double opt_log_likelihood, double beam_log_likelihood);

}  // namespace flashvit
