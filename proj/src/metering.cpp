// SPDX-License-Identifier: Apache-2.0
#include "flashvit/metering.hpp"

#include <algorithm>
#include <numeric>

namespace flashvit {

std::string_view category_name(MemoryCategory category) {
  switch (category) {
    case MemoryCategory::kScratchProb: return "scratch_prob";
    case MemoryCategory::kScratchState: return "scratch_state";
    case MemoryCategory::kHeapElements: return "heap_elements";
    case MemoryCategory::kQueue: return "queue_bytes";
    case MemoryCategory::kRecursion: return "recursion_bytes";
    case MemoryCategory::kCheckpoint: return "checkpoint_bytes";
    case MemoryCategory::kPsiTable: return "psi_table_bytes";
  }
  return "unknown";
}

std::uint64_t MemoryReport::get(MemoryCategory category) const {
  switch (category) {
    case MemoryCategory::kScratchProb: return scratch_prob;
    case MemoryCategory::kScratchState: return scratch_state;
    case MemoryCategory::kHeapElements: return heap_elements;
    case MemoryCategory::kQueue: return queue_bytes;
    case MemoryCategory::kRecursion: return recursion_bytes;
    case MemoryCategory::kCheckpoint: return checkpoint_bytes;
    case MemoryCategory::kPsiTable: return psi_table_bytes;
  }
  return 0;
}

void Meter::charge(MemoryCategory category, std::size_t bytes) {
  const auto idx = static_cast<std::size_t>(category);
  std::lock_guard lock(mu_);
  live_[idx] += bytes;
  peak_[idx] = std::max(peak_[idx], live_[idx]);
  const std::uint64_t total = std::accumulate(live_.begin(), live_.end(), std::uint64_t{0});
  peak_total_ = std::max(peak_total_, total);
}

void Meter::release(MemoryCategory category, std::size_t bytes) {
  const auto idx = static_cast<std::size_t>(category);
  std::lock_guard lock(mu_);
  live_[idx] -= bytes;
}

std::uint64_t Meter::live_total() const {
  std::lock_guard lock(mu_);
  return std::accumulate(live_.begin(), live_.end(), std::uint64_t{0});
}

MemoryReport Meter::memory_report() const {
  std::lock_guard lock(mu_);
  MemoryReport r;
  r.scratch_prob = peak_[static_cast<std::size_t>(MemoryCategory::kScratchProb)];
  r.scratch_state = peak_[static_cast<std::size_t>(MemoryCategory::kScratchState)];
  r.heap_elements = peak_[static_cast<std::size_t>(MemoryCategory::kHeapElements)];
  r.queue_bytes = peak_[static_cast<std::size_t>(MemoryCategory::kQueue)];
  r.recursion_bytes = peak_[static_cast<std::size_t>(MemoryCategory::kRecursion)];
  r.checkpoint_bytes = peak_[static_cast<std::size_t>(MemoryCategory::kCheckpoint)];
  r.psi_table_bytes = peak_[static_cast<std::size_t>(MemoryCategory::kPsiTable)];
  r.peak_total = peak_total_;
  return r;
}

}  // namespace flashvit
