// SPDX-License-Identifier: Apache-2.0
#include "flashvit/beam.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "flashvit/errors.hpp"
#include "flashvit/kernels.hpp"
#include "scheduler.hpp"
#include "trellis.hpp"

namespace flashvit {

BeamHeap::BeamHeap(std::size_t capacity, std::size_t mid_slots, Meter* meter)
    : capacity_(capacity),
      mid_slots_(mid_slots),
      keys_(capacity, kNegInf),
      states_(capacity, kUnsetState),
      mids_(capacity * mid_slots, kUnsetState),
      charge_(meter, MemoryCategory::kHeapElements, capacity * element_bytes(mid_slots)) {
  if (capacity < 1) throw ConfigError("beam capacity must be >= 1");
}

void BeamHeap::write_slot(std::size_t slot, double key, StateIndex state,
                          std::span<const StateIndex> mids) {
  keys_[slot] = key;
  states_[slot] = state;
  std::copy_n(mids.begin(), mid_slots_, mids_.begin() + static_cast<std::ptrdiff_t>(slot * mid_slots_));
}

void BeamHeap::swap_slots(std::size_t a, std::size_t b) {
  std::swap(keys_[a], keys_[b]);
  std::swap(states_[a], states_[b]);
  std::swap_ranges(mids_.begin() + static_cast<std::ptrdiff_t>(a * mid_slots_),
                   mids_.begin() + static_cast<std::ptrdiff_t>((a + 1) * mid_slots_),
                   mids_.begin() + static_cast<std::ptrdiff_t>(b * mid_slots_));
}

void BeamHeap::sift_down(std::size_t slot) {
  for (;;) {
    std::size_t least = slot;
    const std::size_t left = 2 * slot + 1;
    const std::size_t right = left + 1;
    if (left < size_ && worse(left, least)) least = left;
    if (right < size_ && worse(right, least)) least = right;
    if (least == slot) return;
    swap_slots(slot, least);
    slot = least;
  }
}

bool BeamHeap::push(double opt_prob, StateIndex state, std::span<const StateIndex> mids) {
  if (mids.size() != mid_slots_) throw ConfigError("mid_states length does not match heap");
  if (size_ + 1 < capacity_) {
    write_slot(size_++, opt_prob, state, mids);
    return true;
  }
  if (size_ + 1 == capacity_) {
    write_slot(size_++, opt_prob, state, mids);
    for (std::size_t s = size_ / 2; s-- > 0;) sift_down(s);
    return true;
  }
  ++dropped_;
  if (!(opt_prob > keys_[0])) return false;
  write_slot(0, opt_prob, state, mids);
  sift_down(0);
  return true;
}

BeamElement BeamHeap::element(std::size_t slot) const {
  const auto m = mids(slot);
  return {states_[slot], keys_[slot], std::vector<StateIndex>(m.begin(), m.end())};
}

std::size_t BeamHeap::find_state(StateIndex state) const {
  for (std::size_t s = 0; s < size_; ++s) {
    if (states_[s] == state) return s;
  }
  return npos;
}

std::size_t BeamHeap::best_slot() const {
  std::size_t best = npos;
  for (std::size_t s = 0; s < size_; ++s) {
    if (best == npos || worse(best, s)) best = s;
  }
  return best;
}

bool BeamHeap::satisfies_heap_property() const {
  if (!heap_ordered()) return true;
  for (std::size_t c = 1; c < size_; ++c) {
    if (keys_[(c - 1) / 2] > keys_[c]) return false;
  }
  return true;
}

void swap(BeamHeap& a, BeamHeap& b) noexcept {
  std::swap(a.capacity_, b.capacity_);
  std::swap(a.mid_slots_, b.mid_slots_);
  std::swap(a.size_, b.size_);
  std::swap(a.dropped_, b.dropped_);
  a.keys_.swap(b.keys_);
  a.states_.swap(b.states_);
  a.mids_.swap(b.mids_);
  std::swap(a.charge_, b.charge_);
}

bool beam_push(BeamHeap& heap, const BeamElement& element) {
  if (!std::isfinite(element.opt_prob)) throw ConfigError("beam element score must be finite");
  return heap.push(element.opt_prob, element.state, element.mid_states);
}

BeamTile::BeamTile(std::size_t mid_slots, Meter* meter)
    : best(meter, MemoryCategory::kScratchProb, kBeamTileWidth),
      arg(meter, MemoryCategory::kScratchState, kBeamTileWidth),
      mids(meter, MemoryCategory::kScratchState, mid_slots) {}

void beam_step(const HmmModel& model, Symbol symbol, std::size_t t,
               std::span<const std::size_t> division_points, const BeamHeap& heap_pre,
               BeamHeap& heap_total, BeamTile& tile, Meter* meter) {
  if (heap_pre.empty()) throw ConfigError("beam_step needs a nonempty source beam");
  const std::size_t k = model.num_states();
  const auto emit = model.emission_column(symbol);
  heap_total.clear();

  kernels::MaxPlusArgs a;
  a.source_scores = heap_pre.keys();
  a.source_rows = heap_pre.states();
  a.source_count = heap_pre.size();
  a.stride = k;
  a.best = tile.best.data();
  a.arg = tile.arg.data();

  for (std::size_t i0 = 0; i0 < k; i0 += kBeamTileWidth) {
    a.width = std::min(kBeamTileWidth, k - i0);
    a.trans = model.log_transition().data() + i0;
    a.emit = emit.data() + i0;
    kernels::max_plus(a);
    for (std::size_t lane = 0; lane < a.width; ++lane) {
      if (tile.best[lane] == kNegInf) continue;
      const auto from = static_cast<std::size_t>(tile.arg[lane]);
      const auto inherited = heap_pre.mids(from);
      for (std::size_t j = 0; j < division_points.size(); ++j) {
        const std::size_t d = division_points[j];
        tile.mids[j] = t == d + 1 ? heap_pre.state(from) : t > d + 1 ? inherited[j] : kUnsetState;
      }
      heap_total.push(tile.best[lane], static_cast<StateIndex>(i0 + lane),
                      {tile.mids.data(), division_points.size()});
    }
  }
  if (meter != nullptr) meter->add_updates(k * heap_pre.size());
  if (heap_total.empty()) {
    throw BeamExhausted("beam of width " + std::to_string(heap_total.capacity()) +
                        " has no finite successor at timestep " + std::to_string(t));
  }
}

namespace {

// Dual heaps plus the relaxation tile for one task context.
struct BeamContext {
  BeamContext(std::size_t beam_width, std::size_t mid_slots, Meter* meter)
      : pre(beam_width, mid_slots, meter), total(beam_width, mid_slots, meter),
        tile(mid_slots, meter) {}

  BeamHeap pre;
  BeamHeap total;
  BeamTile tile;
};

// Fills ctx.pre with the timestep-`start` beam: from the prior when there is
// no known predecessor, else from the single state `prev` (pruned init).
void seed_beam(BeamContext& ctx, const HmmModel& model, Symbol symbol,
               std::optional<StateIndex> prev, Meter* meter) {
  const std::size_t k = model.num_states();
  const auto emit = model.emission_column(symbol);
  const auto origin = prev ? model.transition_row(*prev) : model.log_initial();
  ctx.pre.clear();
  std::fill(ctx.tile.mids.begin(), ctx.tile.mids.end(), kUnsetState);
  for (std::size_t i = 0; i < k; ++i) {
    const double score = origin[i] + emit[i];
    if (score != kNegInf) ctx.pre.push(score, static_cast<StateIndex>(i), ctx.tile.mids.span());
  }
  if (meter != nullptr) meter->add_updates(k);
}

// Runs timesteps start+1..end, swapping heap roles after every step. A
// collapse before any candidate was dropped means no path exists at all.
void run_beam(BeamContext& ctx, const HmmModel& model, const ObservationSequence& obs,
              std::size_t start, std::size_t end, std::span<const std::size_t> division_points,
              Meter* meter) {
  bool pruned = ctx.pre.dropped() > 0;
  if (ctx.pre.empty()) {
    if (!pruned && start == 0) detail::throw_infeasible(start);
    throw BeamExhausted("beam is empty at timestep " + std::to_string(start));
  }
  for (std::size_t t = start + 1; t <= end; ++t) {
    try {
      beam_step(model, obs[t], t, division_points, ctx.pre, ctx.total, ctx.tile, meter);
    } catch (const BeamExhausted&) {
      if (!pruned && start == 0) detail::throw_infeasible(t);
      throw;
    }
    pruned = pruned || ctx.total.dropped() > 0;
    swap(ctx.pre, ctx.total);
  }
}

StateIndex solve_beam_subtask(BeamContext& ctx, const HmmModel& model,
                              const ObservationSequence& obs, const SubtaskSpec& task,
                              std::optional<StateIndex> prev, StateIndex end_state,
                              Meter* meter) {
  const auto start = static_cast<std::size_t>(task.start);
  const auto end = static_cast<std::size_t>(task.end);
  const std::size_t division[1] = {static_cast<std::size_t>(task.mid())};
  seed_beam(ctx, model, obs[start], prev, meter);
  run_beam(ctx, model, obs, start, end, division, meter);

  std::size_t slot = ctx.pre.find_state(end_state);
  if (slot == BeamHeap::npos) {
    if (meter != nullptr) meter->note_inexact_traceback();
    slot = ctx.pre.best_slot();
  }
  return ctx.pre.mids(slot)[0];
}

}  // namespace

DecodedPath flash_bs_decode(const HmmModel& model, const ObservationSequence& obs,
                            std::size_t parallelism, std::size_t beam_width, Meter* meter,
                            const SchedulerHooks& hooks) {
  obs.validate_against(model);
  if (beam_width < 1 || beam_width > model.num_states()) {
    throw ConfigError("beam width must lie in [1, K]");
  }
  const std::size_t len = obs.size();
  const auto division_points = initial_division_points(len, parallelism);

  OutputBoard board(len);
  {
    BeamContext ctx(beam_width, division_points.size(), meter);
    seed_beam(ctx, model, obs[0], std::nullopt, meter);
    run_beam(ctx, model, obs, 0, len - 1, division_points, meter);
    const std::size_t slot = ctx.pre.best_slot();
    board.write(len - 1, ctx.pre.state(slot));
    const auto mids = ctx.pre.mids(slot);
    for (std::size_t j = 0; j < division_points.size(); ++j) board.write(division_points[j], mids[j]);
  }

  if (!board.full()) {
    TaskQueue queue(len - board.filled(), meter);
    detail::seed_queue(queue, len, division_points);

    std::vector<BeamContext> workers;
    workers.reserve(parallelism);
    for (std::size_t w = 0; w < parallelism; ++w) workers.emplace_back(beam_width, 1, meter);
    detail::run_workers(
        board, queue, std::span<BeamContext>(workers),
        [&](BeamContext& ctx, const SubtaskSpec& task, std::optional<StateIndex> prev,
            StateIndex end_state) {
          return solve_beam_subtask(ctx, model, obs, task, prev, end_state, meter);
        },
        hooks);
  }

  if (!board.full()) throw InternalConsistencyError("decode ended with unfilled slots");
  DecodedPath path;
  path.states = board.snapshot();
  path.log_likelihood = path_score(model, obs, path.states);
  return path;
}

double relative_error(double opt_log_likelihood, double beam_log_likelihood) {
  if (opt_log_likelihood == 0.0 || !std::isfinite(opt_log_likelihood)) {
    throw ConfigError("relative error needs a finite, nonzero optimum; report the absolute gap");
  }
  return std::abs(opt_log_likelihood - beam_log_likelihood) / std::abs(opt_log_likelihood);
}

}  // namespace flashvit
