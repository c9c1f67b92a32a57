// SPDX-License-Identifier: Apache-2.0
#include "flashvit/flash.hpp"

#include <algorithm>
#include <string>

#include "flashvit/errors.hpp"
#include "scheduler.hpp"
#include "trellis.hpp"

namespace flashvit {

TaskQueue::TaskQueue(std::size_t capacity, Meter* meter)
    : ring_(meter, MemoryCategory::kQueue, capacity) {}

void TaskQueue::push(SubtaskSpec task) {
  if (size_ == ring_.size()) throw InternalConsistencyError("task queue overflow");
  ring_[(head_ + size_) % ring_.size()] = task;
  ++size_;
}

std::optional<SubtaskSpec> TaskQueue::pop() {
  if (size_ == 0) return std::nullopt;
  const SubtaskSpec task = ring_[head_];
  head_ = (head_ + 1) % ring_.size();
  --size_;
  ++dequeued_;
  return task;
}

OutputBoard::OutputBoard(std::size_t length) : slots_(length) {
  for (auto& slot : slots_) slot.store(kUnsetState, std::memory_order_relaxed);
}

void OutputBoard::write(std::size_t t, StateIndex state) {
  if (state < 0) {
    throw InternalConsistencyError("invalid state written at timestep " + std::to_string(t));
  }
  StateIndex expected = kUnsetState;
  if (!slots_[t].compare_exchange_strong(expected, state, std::memory_order_acq_rel)) {
    throw InternalConsistencyError("output slot " + std::to_string(t) + " written twice");
  }
  filled_.fetch_add(1, std::memory_order_acq_rel);
}

std::vector<StateIndex> OutputBoard::snapshot() const {
  std::vector<StateIndex> out(slots_.size());
  for (std::size_t t = 0; t < slots_.size(); ++t) out[t] = read(t);
  return out;
}

DecodeScratch::DecodeScratch(std::size_t num_states, std::size_t num_division_points,
                             Meter* meter)
    : prev_(meter, MemoryCategory::kScratchProb, num_states),
      cur_(meter, MemoryCategory::kScratchProb, num_states),
      pre_(meter, MemoryCategory::kScratchState, num_states) {
  mids_.reserve(num_division_points);
  for (std::size_t j = 0; j < num_division_points; ++j) {
    mids_.emplace_back(meter, MemoryCategory::kScratchState, num_states, kUnsetState);
  }
  if (num_division_points > 1) spare_.emplace(meter, MemoryCategory::kScratchState, num_states);
}

void DecodeScratch::reset_mid_states() {
  for (auto& mid : mids_) std::fill(mid.begin(), mid.end(), kUnsetState);
}

namespace {

// MidState of the best predecessor; UNSET for states with no finite candidate.
inline StateIndex compose(const TrackedBuffer<StateIndex>& mid, StateIndex pre) {
  return pre < 0 ? kUnsetState : mid[static_cast<std::size_t>(pre)];
}

}  // namespace

void DecodeScratch::step(const HmmModel& model, Symbol symbol, std::size_t t,
                         std::span<const std::size_t> division_points) {
  const std::size_t k = num_states();
  detail::relax_dense(model, prev_.span(), symbol, cur_.span(), pre_.span());
  swap(prev_, cur_);

  std::size_t pending_gathers = 0;
  for (std::size_t j = 0; j < mids_.size(); ++j) {
    const std::size_t d = division_points[j];
    if (t == d + 1) {
      std::copy(pre_.begin(), pre_.end(), mids_[j].begin());
    } else if (t > d + 1) {
      ++pending_gathers;
    }
  }
  // MidState[i] <- MidState[PreState[i]] must read the old array, so it
  // goes through a second buffer; the last one reuses PreState in place.
  for (std::size_t j = 0; j < mids_.size() && pending_gathers > 0; ++j) {
    if (t <= division_points[j] + 1) continue;
    auto& mid = mids_[j];
    if (--pending_gathers == 0) {
      for (std::size_t i = 0; i < k; ++i) pre_[i] = compose(mid, pre_[i]);
      swap(pre_, mid);
    } else {
      auto& spare = *spare_;
      for (std::size_t i = 0; i < k; ++i) spare[i] = compose(mid, pre_[i]);
      swap(spare, mid);
    }
  }
}

std::vector<std::size_t> plan_segments(std::size_t seq_len, std::size_t parallelism) {
  if (parallelism < 1 || parallelism > seq_len) {
    throw ConfigError("parallelism must lie in [1, T] (T = " + std::to_string(seq_len) + ")");
  }
  const std::size_t base = seq_len / parallelism;
  const std::size_t longer = seq_len % parallelism;
  std::vector<std::size_t> boundaries;
  boundaries.reserve(parallelism - 1);
  std::size_t end = 0;
  for (std::size_t s = 0; s + 1 < parallelism; ++s) {
    end += base + (s < longer ? 1 : 0);
    boundaries.push_back(end - 1);
  }
  return boundaries;
}

std::vector<std::size_t> initial_division_points(std::size_t seq_len, std::size_t parallelism) {
  if (parallelism < 1 || parallelism > seq_len) {
    throw ConfigError("parallelism must lie in [1, T] (T = " + std::to_string(seq_len) + ")");
  }
  if (seq_len == 1) return {};
  // P = 1 and P = 2 coincide: both split at floor((T-1)/2).
  return plan_segments(seq_len, std::max<std::size_t>(parallelism, 2));
}

namespace {

void count_updates(Meter* meter, std::uint64_t n) {
  if (meter != nullptr) meter->add_updates(n);
}

StateIndex solve_subtask(DecodeScratch& scratch, const HmmModel& model,
                         const ObservationSequence& obs, std::size_t start, std::size_t end,
                         std::optional<StateIndex> prev_state, StateIndex end_state,
                         Meter* meter, const MidStateObserver& observer) {
  const std::size_t k = model.num_states();
  const std::size_t mid = (start + end) / 2;
  const std::size_t division[1] = {mid};

  if (prev_state) {
    detail::init_from_state(model, *prev_state, obs[start], scratch.opt_prob());
  } else {
    detail::init_from_prior(model, obs[start], scratch.opt_prob());
  }
  scratch.reset_mid_states();
  count_updates(meter, k);
  if (observer) observer(start, scratch.mid_state(0));

  for (std::size_t t = start + 1; t <= end; ++t) {
    scratch.step(model, obs[t], t, division);
    count_updates(meter, k * k);
    if (observer) observer(t, scratch.mid_state(0));
  }

  if (scratch.opt_prob()[static_cast<std::size_t>(end_state)] == kNegInf) {
    throw InternalConsistencyError("subtask [" + std::to_string(start) + ", " +
                                   std::to_string(end) + "] cannot reach its end state");
  }
  return scratch.mid_state(0)[static_cast<std::size_t>(end_state)];
}

}  // namespace

InitialTaskResult decode_initial_task(const HmmModel& model, const ObservationSequence& obs,
                                      std::span<const std::size_t> division_points,
                                      Meter* meter) {
  obs.validate_against(model);
  const std::size_t k = model.num_states();
  const std::size_t len = obs.size();
  for (std::size_t j = 0; j < division_points.size(); ++j) {
    if (division_points[j] + 1 >= len || (j > 0 && division_points[j] <= division_points[j - 1])) {
      throw ConfigError("division points must be strictly increasing and lie in [0, T-1)");
    }
  }

  DecodeScratch scratch(k, division_points.size(), meter);
  detail::init_from_prior(model, obs[0], scratch.opt_prob());
  count_updates(meter, k);
  if (detail::all_absent(scratch.opt_prob())) detail::throw_infeasible(0);

  for (std::size_t t = 1; t < len; ++t) {
    scratch.step(model, obs[t], t, division_points);
    count_updates(meter, k * k);
    if (detail::all_absent(scratch.opt_prob())) detail::throw_infeasible(t);
  }

  InitialTaskResult result;
  result.final_state = detail::argmax_lowest(scratch.opt_prob());
  result.division_states.reserve(division_points.size());
  for (std::size_t j = 0; j < division_points.size(); ++j) {
    result.division_states.push_back(
        scratch.mid_state(j)[static_cast<std::size_t>(result.final_state)]);
  }
  return result;
}

StateIndex decode_subtask(const HmmModel& model, const ObservationSequence& obs,
                          std::size_t start, std::size_t end,
                          std::optional<StateIndex> prev_state, StateIndex end_state,
                          Meter* meter, const MidStateObserver& observer) {
  obs.validate_against(model);
  const auto k = static_cast<StateIndex>(model.num_states());
  if (end <= start || end >= obs.size()) {
    throw ConfigError("subtask needs start < end < T");
  }
  if (prev_state.has_value() != (start > 0)) {
    throw ConfigError("a predecessor state is required exactly when start > 0");
  }
  if ((prev_state && (*prev_state < 0 || *prev_state >= k)) || end_state < 0 || end_state >= k) {
    throw ConfigError("boundary state out of range");
  }
  DecodeScratch scratch(model.num_states(), 1, meter);
  return solve_subtask(scratch, model, obs, start, end, prev_state, end_state, meter, observer);
}

DecodedPath flash_decode(const HmmModel& model, const ObservationSequence& obs,
                         std::size_t parallelism, Meter* meter, const SchedulerHooks& hooks) {
  obs.validate_against(model);
  const std::size_t len = obs.size();
  const auto division_points = initial_division_points(len, parallelism);

  OutputBoard board(len);
  {
    const auto initial = decode_initial_task(model, obs, division_points, meter);
    board.write(len - 1, initial.final_state);
    for (std::size_t j = 0; j < division_points.size(); ++j) {
      board.write(division_points[j], initial.division_states[j]);
    }
  }

  if (!board.full()) {
    // Every worker subtask emits exactly one new state.
    TaskQueue queue(len - board.filled(), meter);
    detail::seed_queue(queue, len, division_points);

    std::vector<DecodeScratch> workers;
    workers.reserve(parallelism);
    for (std::size_t w = 0; w < parallelism; ++w) {
      workers.emplace_back(model.num_states(), 1, meter);
    }
    detail::run_workers(
        board, queue, std::span<DecodeScratch>(workers),
        [&](DecodeScratch& scratch, const SubtaskSpec& task, std::optional<StateIndex> prev,
            StateIndex end_state) {
          return solve_subtask(scratch, model, obs, static_cast<std::size_t>(task.start),
                               static_cast<std::size_t>(task.end), prev, end_state, meter, {});
        },
        hooks);
  }

  if (!board.full()) throw InternalConsistencyError("decode ended with unfilled slots");
  DecodedPath path;
  path.states = board.snapshot();
  path.log_likelihood = path_score(model, obs, path.states);
  return path;
}

}  // namespace flashvit
