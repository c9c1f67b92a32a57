// SPDX-License-Identifier: Apache-2.0
#include "flashvit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "flashvit/errors.hpp"
#include "trellis.hpp"

namespace flashvit {

namespace {

std::size_t ceil_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while (r * r < n) ++r;
  return r;
}

std::size_t count_finite(std::span<const double> column) {
  return static_cast<std::size_t>(
      std::count_if(column.begin(), column.end(), [](double v) { return v != kNegInf; }));
}

class SieveMp {
 public:
  SieveMp(const HmmModel& model, const ObservationSequence& obs, Meter* meter)
      : model_(model),
        obs_(obs),
        meter_(meter),
        k_(model.num_states()),
        prev_(meter, MemoryCategory::kScratchProb, k_),
        cur_(meter, MemoryCategory::kScratchProb, k_),
        pre_(meter, MemoryCategory::kScratchState, k_),
        mid_(meter, MemoryCategory::kScratchState, k_),
        states_(obs.size(), kUnsetState) {}

  std::vector<StateIndex> run() {
    solve(0, obs_.size() - 1, nullptr);
    return std::move(states_);
  }

 private:
  // Decodes [m, n] given delta_{m-1} (null when m == 0) and the already known
  // optimal state at n (unknown only for the top call).
  void solve(std::size_t m, std::size_t n, const double* boundary) {
    MeterCharge frame(meter_, MemoryCategory::kRecursion, kRecursionFrameBytes);
    const std::size_t mid = (m + n) / 2;
    const bool has_right = n > mid + 1;
    std::optional<TrackedBuffer<double>> mid_column;
    if (has_right) mid_column.emplace(meter_, MemoryCategory::kScratchProb, k_);

    if (boundary == nullptr) {
      detail::init_from_prior(model_, obs_[m], prev_.span());
      add_updates(k_);
    } else {
      detail::relax_dense(model_, {boundary, k_}, obs_[m], prev_.span(), pre_.span());
      add_updates(k_ * k_);
    }
    if (detail::all_absent(prev_.span())) detail::throw_infeasible(m);
    if (has_right && mid == m) std::copy(prev_.begin(), prev_.end(), mid_column->begin());

    for (std::size_t t = m + 1; t <= n; ++t) {
      detail::relax_dense(model_, prev_.span(), obs_[t], cur_.span(), pre_.span());
      add_updates(k_ * k_);
      if (detail::all_absent(cur_.span())) detail::throw_infeasible(t);
      if (t == mid + 1) {
        swap(mid_, pre_);
      } else if (t > mid + 1) {
        for (std::size_t i = 0; i < k_; ++i) {
          pre_[i] = pre_[i] < 0 ? kUnsetState : mid_[static_cast<std::size_t>(pre_[i])];
        }
        swap(mid_, pre_);
      }
      if (has_right && t == mid) std::copy(cur_.begin(), cur_.end(), mid_column->begin());
      swap(prev_, cur_);
    }

    if (states_[n] == kUnsetState) states_[n] = detail::argmax_lowest(prev_.span());
    if (n == m) return;
    states_[mid] = mid_[static_cast<std::size_t>(states_[n])];

    if (mid > m) solve(m, mid, boundary);
    if (has_right) solve(mid + 1, n, mid_column->data());
  }

  void add_updates(std::uint64_t n) {
    if (meter_ != nullptr) meter_->add_updates(n);
  }

  const HmmModel& model_;
  const ObservationSequence& obs_;
  Meter* meter_;
  std::size_t k_;
  TrackedBuffer<double> prev_;
  TrackedBuffer<double> cur_;
  TrackedBuffer<StateIndex> pre_;
  TrackedBuffer<StateIndex> mid_;
  std::vector<StateIndex> states_;
};

}  // namespace

CheckpointLayout checkpoint_layout(std::size_t seq_len) {
  if (seq_len < 1) throw ConfigError("sequence length must be >= 1");
  const std::size_t target = ceil_sqrt(seq_len);
  CheckpointLayout layout;
  layout.interval_length = (seq_len + target - 1) / target;
  layout.num_checkpoints = (seq_len + layout.interval_length - 1) / layout.interval_length;
  return layout;
}

DecodedPath checkpoint_viterbi(const HmmModel& model, const ObservationSequence& obs,
                               Meter* meter) {
  obs.validate_against(model);
  const std::size_t k = model.num_states();
  const std::size_t len = obs.size();
  const auto layout = checkpoint_layout(len);
  const std::size_t stride = layout.interval_length;

  auto add_updates = [meter](std::uint64_t n) {
    if (meter != nullptr) meter->add_updates(n);
  };

  TrackedBuffer<double> checkpoints(meter, MemoryCategory::kCheckpoint,
                                    layout.num_checkpoints * k);
  TrackedBuffer<double> prev(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<double> cur(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<StateIndex> arg(meter, MemoryCategory::kScratchState, k);

  detail::init_from_prior(model, obs[0], prev.span());
  add_updates(k);
  if (detail::all_absent(prev.span())) detail::throw_infeasible(0);
  std::copy(prev.begin(), prev.end(), checkpoints.begin());

  for (std::size_t t = 1; t < len; ++t) {
    detail::relax_dense(model, prev.span(), obs[t], cur.span(), arg.span());
    add_updates(k * k);
    if (detail::all_absent(cur.span())) detail::throw_infeasible(t);
    if (t % stride == 0) {
      std::copy(cur.begin(), cur.end(), checkpoints.begin() + static_cast<std::ptrdiff_t>((t / stride) * k));
    }
    swap(prev, cur);
  }

  DecodedPath path;
  path.states.assign(len, kUnsetState);
  path.states[len - 1] = detail::argmax_lowest(prev.span());

  // Window j re-derives backpointers for t in (j*L, known], where `known` is
  // the earliest timestep whose optimal state is already recovered.
  TrackedBuffer<StateIndex> window(meter, MemoryCategory::kPsiTable, stride * k);
  std::size_t known = len - 1;
  for (std::size_t j = layout.num_checkpoints; j-- > 0;) {
    const std::size_t start = j * stride;
    if (known == start) continue;
    std::copy_n(checkpoints.begin() + static_cast<std::ptrdiff_t>(j * k), k, prev.begin());
    for (std::size_t t = start + 1; t <= known; ++t) {
      detail::relax_dense(model, prev.span(), obs[t], cur.span(),
                          {window.data() + (t - start - 1) * k, k});
      add_updates(k * k);
      swap(prev, cur);
    }
    for (std::size_t t = known; t > start; --t) {
      path.states[t - 1] =
          window[(t - start - 1) * k + static_cast<std::size_t>(path.states[t])];
    }
    known = start;
  }

  path.log_likelihood = path_score(model, obs, path.states);
  return path;
}

DecodedPath sieve_mp_decode(const HmmModel& model, const ObservationSequence& obs,
                            Meter* meter) {
  obs.validate_against(model);
  DecodedPath path;
  path.states = SieveMp(model, obs, meter).run();
  path.log_likelihood = path_score(model, obs, path.states);
  return path;
}

DecodedPath static_beam_decode(const HmmModel& model, const ObservationSequence& obs,
                               std::size_t beam_width, Meter* meter) {
  obs.validate_against(model);
  const std::size_t k = model.num_states();
  const std::size_t len = obs.size();
  if (beam_width < 1 || beam_width > k) {
    throw ConfigError("beam width must lie in [1, K]");
  }

  TrackedBuffer<double> prev(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<double> cur(meter, MemoryCategory::kScratchProb, k);
  TrackedBuffer<StateIndex> order(meter, MemoryCategory::kScratchState, k);
  TrackedBuffer<StateIndex> psi(meter, MemoryCategory::kPsiTable, k * len, kUnsetState);

  bool pruned = false;
  // Keeps the top `beam_width` finite entries (ties: lower index), clears the rest.
  auto prune = [&](std::span<double> column) {
    if (count_finite(column) <= beam_width) return;
    std::iota(order.begin(), order.end(), 0);
    auto better = [&column](StateIndex a, StateIndex b) {
      const double va = column[static_cast<std::size_t>(a)];
      const double vb = column[static_cast<std::size_t>(b)];
      return va > vb || (va == vb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(beam_width),
                     order.end(), better);
    for (std::size_t r = beam_width; r < k; ++r) column[static_cast<std::size_t>(order[r])] = kNegInf;
    pruned = true;
  };

  detail::init_from_prior(model, obs[0], prev.span());
  if (meter != nullptr) meter->add_updates(k);
  if (detail::all_absent(prev.span())) detail::throw_infeasible(0);
  prune(prev.span());

  for (std::size_t t = 1; t < len; ++t) {
    const std::size_t live = count_finite(prev.span());
    detail::relax_dense(model, prev.span(), obs[t], cur.span(), {psi.data() + t * k, k});
    if (meter != nullptr) meter->add_updates(live * k);
    if (detail::all_absent(cur.span())) {
      if (!pruned) detail::throw_infeasible(t);
      throw BeamExhausted("static beam of width " + std::to_string(beam_width) +
                          " has no finite successor at timestep " + std::to_string(t));
    }
    prune(cur.span());
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

}  // namespace flashvit
