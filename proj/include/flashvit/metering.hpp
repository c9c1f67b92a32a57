// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace flashvit {

// Logical byte charges. Platform-independent on purpose: a log-probability is
// 8 bytes, a state index 4, a queued subtask 8, a recursion frame 64.
inline constexpr std::size_t kProbBytes = 8;
inline constexpr std::size_t kStateBytes = 4;
inline constexpr std::size_t kQueueEntryBytes = 8;
inline constexpr std::size_t kRecursionFrameBytes = 64;

enum class MemoryCategory : std::size_t {
  kScratchProb,
  kScratchState,
  kHeapElements,
  kQueue,
  kRecursion,
  kCheckpoint,
  kPsiTable,
};
inline constexpr std::size_t kNumMemoryCategories = 7;

std::string_view category_name(MemoryCategory category);

/// Peak bytes per category, plus the peak of the category sum over time.
struct MemoryReport {
  std::uint64_t scratch_prob = 0;
  std::uint64_t scratch_state = 0;
  std::uint64_t heap_elements = 0;
  std::uint64_t queue_bytes = 0;
  std::uint64_t recursion_bytes = 0;
  std::uint64_t checkpoint_bytes = 0;
  std::uint64_t psi_table_bytes = 0;
  std::uint64_t peak_total = 0;

  std::uint64_t get(MemoryCategory category) const;
  bool operator==(const MemoryReport&) const = default;
};

struct TimingReport {
  double wall_seconds = 0.0;
  std::uint64_t dp_cell_updates = 0;
};

/// Per-run accounting of decoder working memory and DP work. Thread-safe:
/// flash workers charge and release concurrently. The peak is taken from a
/// category-sum snapshot at every charge.
class Meter {
 public:
  void charge(MemoryCategory category, std::size_t bytes);
  void release(MemoryCategory category, std::size_t bytes);

  void add_updates(std::uint64_t count) {
    updates_.fetch_add(count, std::memory_order_relaxed);
  }
  void note_inexact_traceback() { inexact_.fetch_add(1, std::memory_order_relaxed); }

  MemoryReport memory_report() const;
  std::uint64_t dp_cell_updates() const { return updates_.load(std::memory_order_relaxed); }
  std::size_t inexact_tracebacks() const { return inexact_.load(std::memory_order_relaxed); }
  /// Bytes currently outstanding across all categories.
  std::uint64_t live_total() const;

 private:
  mutable std::mutex mu_;
  std::array<std::uint64_t, kNumMemoryCategories> live_{};
  std::array<std::uint64_t, kNumMemoryCategories> peak_{};
  std::uint64_t peak_total_ = 0;
  std::atomic<std::uint64_t> updates_{0};
  std::atomic<std::size_t> inexact_{0};
};

/// RAII charge against a meter; a null meter makes it a no-op.
class MeterCharge {
 public:
  MeterCharge() = default;
  MeterCharge(Meter* meter, MemoryCategory category, std::size_t bytes)
      : meter_(meter), category_(category), bytes_(bytes) {
    if (meter_ != nullptr) meter_->charge(category_, bytes_);
  }
  MeterCharge(MeterCharge&& other) noexcept { *this = std::move(other); }
  MeterCharge& operator=(MeterCharge&& other) noexcept {
    if (this != &other) {
      reset();
      meter_ = std::exchange(other.meter_, nullptr);
      category_ = other.category_;
      bytes_ = other.bytes_;
    }
    return *this;
  }
  MeterCharge(const MeterCharge&) = delete;
  MeterCharge& operator=(const MeterCharge&) = delete;
  ~MeterCharge() { reset(); }

  void reset() {
    if (meter_ != nullptr) meter_->release(category_, bytes_);
    meter_ = nullptr;
  }

 private:
  Meter* meter_ = nullptr;
  MemoryCategory category_ = MemoryCategory::kScratchProb;
  std::size_t bytes_ = 0;
};

/// A fixed-size array whose footprint is charged to a meter category for as
/// long as it lives.
template <typename T>
class TrackedBuffer {
 public:
  TrackedBuffer() = default;
  TrackedBuffer(Meter* meter, MemoryCategory category, std::size_t count, T fill = T{})
      : data_(count, fill), charge_(meter, category, count * sizeof(T)) {}

  std::size_t size() const { return data_.size(); }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  /// Exchanges contents and charges; used for double-buffer role swaps.
  friend void swap(TrackedBuffer& a, TrackedBuffer& b) noexcept {
    a.data_.swap(b.data_);
    std::swap(a.charge_, b.charge_);
  }

 private:
  std::vector<T> data_;
  MeterCharge charge_;
};

}  // namespace flashvit
