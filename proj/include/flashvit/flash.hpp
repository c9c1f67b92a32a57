// SPDX-License-Identifier: Apache-2.0
#pragma once

// FLASH Viterbi: non-recursive divide-and-conquer decoding with pruned,
// mutually independent subtasks executed by P workers.
//
// The initial task runs the full-length DP once, tracking the optimal state
// at P-1 division points (the midpoint when P = 1) and at T-1. Every later
// subtask (m, n) knows the optimal states at m-1 and n, restarts its DP from
// the state at m-1 alone, and emits the optimal state at floor((m+n)/2).

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flashvit/hmm_model.hpp"
#include "flashvit/metering.hpp"
#include "flashvit/oracle.hpp"

namespace flashvit {

/// Decoding segment [start, end], both inclusive.
struct SubtaskSpec {
  std::int32_t start = 0;
  std::int32_t end = 0;

  std::int32_t mid() const { return (start + end) / 2; }
  bool operator==(const SubtaskSpec&) const = default;
};
static_assert(sizeof(SubtaskSpec) == kQueueEntryBytes);

/// Bounded FIFO of pending subtasks backed by a metered ring buffer.
/// Not synchronized; concurrent callers hold the scheduler lock.
class TaskQueue {
 public:
  TaskQueue(std::size_t capacity, Meter* meter);

  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return ring_.size(); }
  /// Throws InternalConsistencyError when full.
  void push(SubtaskSpec task);
  std::optional<SubtaskSpec> pop();
  /// Number of successful pops so far (the TaskCount diagnostic).
  std::size_t dequeued() const { return dequeued_; }

 private:
  TrackedBuffer<SubtaskSpec> ring_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::size_t dequeued_ = 0;
};

/// Length-T array of optimal-state slots, each written exactly once.
class OutputBoard {
 public:
  explicit OutputBoard(std::size_t length);

  std::size_t size() const { return slots_.size(); }
  /// Throws InternalConsistencyError if the slot was already written.
  void write(std::size_t t, StateIndex state);
  StateIndex read(std::size_t t) const { return slots_[t].load(std::memory_order_acquire); }
  bool is_set(std::size_t t) const { return read(t) != kUnsetState; }
  std::size_t filled() const { return filled_.load(std::memory_order_acquire); }
  bool full() const { return filled() == size(); }
  std::vector<StateIndex> snapshot() const;

 private:
  std::vector<std::atomic<StateIndex>> slots_;
  std::atomic<std::size_t> filled_{0};
};

/// OptProb (double-buffered), PreState and one MidState array per tracked
/// division point. A spare state array is allocated when more than one
/// division point is tracked, for the out-of-place MidState gather.
class DecodeScratch {
 public:
  DecodeScratch(std::size_t num_states, std::size_t num_division_points, Meter* meter);

  std::size_t num_states() const { return prev_.size(); }
  std::size_t num_division_points() const { return mids_.size(); }

  std::span<double> opt_prob() { return prev_.span(); }
  std::span<const double> opt_prob() const { return prev_.span(); }
  std::span<const StateIndex> mid_state(std::size_t j) const { return mids_[j].span(); }

  /// Marks every MidState entry UNSET.
  void reset_mid_states();

  /// Advances the DP from timestep t-1 to t and applies the MidState rule for
  /// every division point: copy PreState at t = d+1, compose at t > d+1.
  void step(const HmmModel& model, Symbol symbol, std::size_t t,
            std::span<const std::size_t> division_points);

 private:
  TrackedBuffer<double> prev_;
  TrackedBuffer<double> cur_;
  TrackedBuffer<StateIndex> pre_;
  std::vector<TrackedBuffer<StateIndex>> mids_;
  std::optional<TrackedBuffer<StateIndex>> spare_;
};

/// Last index of each of the first P-1 segments when T is split into P
/// segments whose lengths differ by at most one (longer ones first).
/// Throws ConfigError unless 1 <= P <= T.
std::vector<std::size_t> plan_segments(std::size_t seq_len, std::size_t parallelism);

/// Division points of the initial task: the P-way boundaries, or the single
/// midpoint floor((T-1)/2) when P = 1. Empty when T = 1.
std::vector<std::size_t> initial_division_points(std::size_t seq_len, std::size_t parallelism);

struct InitialTaskResult {
  StateIndex final_state = kUnsetState;
  std::vector<StateIndex> division_states;
};

/// Full-sequence DP with one MidState array per division point. Division
/// points must be strictly increasing and lie in [0, T-1).
InitialTaskResult decode_initial_task(const HmmModel& model, const ObservationSequence& obs,
                                      std::span<const std::size_t> division_points,
                                      Meter* meter = nullptr);

/// Called after every DP step of a subtask with the MidState array; lets
/// tests observe that it stays UNSET up to the midpoint.
using MidStateObserver = std::function<void(std::size_t t, std::span<const StateIndex> mid_state)>;

/// Decodes segment [start, end] given the optimal state at start-1 (nullopt
/// when start = 0) and at end; returns the optimal state at the midpoint.
/// Throws InternalConsistencyError if `end_state` is unreachable.
StateIndex decode_subtask(const HmmModel& model, const ObservationSequence& obs,
                          std::size_t start, std::size_t end,
                          std::optional<StateIndex> prev_state, StateIndex end_state,
                          Meter* meter = nullptr, const MidStateObserver& observer = {});

/// Instrumentation points of the worker loop. Both may be invoked
/// concurrently from different workers.
struct SchedulerHooks {
  std::function<void(const SubtaskSpec&, const OutputBoard&)> on_dequeue;
  std::function<void(const SubtaskSpec&, StateIndex mid_state)> on_complete;
};

/// Decodes with P workers. The result does not depend on P or on scheduling.
DecodedPath flash_decode(const HmmModel& model, const ObservationSequence& obs,
                         std::size_t parallelism, Meter* meter = nullptr,
                         const SchedulerHooks& hooks = {});

}  // namespace flashvit
