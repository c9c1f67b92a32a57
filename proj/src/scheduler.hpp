// SPDX-License-Identifier: Apache-2.0
#pragma once

// Worker loop shared by flash_decode and flash_bs_decode. Internal header.

#include <condition_variable>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "flashvit/flash.hpp"

namespace flashvit::detail {

/// Enqueues the segment between consecutive initial outputs whenever it still
/// holds an unknown state.
inline void seed_queue(TaskQueue& queue, std::size_t seq_len,
                       std::span<const std::size_t> division_points) {
  std::size_t start = 0;
  auto add = [&](std::size_t end) {
    if (end > start) {
      queue.push({static_cast<std::int32_t>(start), static_cast<std::int32_t>(end)});
    }
    start = end + 1;
  };
  for (std::size_t d : division_points) add(d);
  add(seq_len - 1);
}

/// Children of a finished subtask. A segment of length 3 has only a left
/// child: the right one would share the parent's midpoint.
inline void enqueue_children(TaskQueue& queue, const SubtaskSpec& task) {
  const std::int32_t span = task.end - task.start;
  const std::int32_t mid = task.mid();
  if (span > 2) {
    queue.push({task.start, mid});
    queue.push({mid + 1, task.end});
  } else if (span == 2) {
    queue.push({task.start, mid});
  }
}

/// Runs queued subtasks until the board is full. `solve(worker, task, prev,
/// end)` returns the optimal state at task.mid(). One worker runs inline on
/// the calling thread without any locking.
template <typename Worker, typename Solve>
void run_workers(OutputBoard& board, TaskQueue& queue, std::span<Worker> workers,
                 Solve&& solve, const SchedulerHooks& hooks) {
  auto boundary = [&board](const SubtaskSpec& task) {
    std::optional<StateIndex> prev;
    if (task.start > 0) prev = board.read(static_cast<std::size_t>(task.start - 1));
    return prev;
  };

  if (workers.size() == 1) {
    while (auto task = queue.pop()) {
      if (hooks.on_dequeue) hooks.on_dequeue(*task, board);
      const StateIndex mid_state = solve(workers[0], *task, boundary(*task),
                                         board.read(static_cast<std::size_t>(task->end)));
      board.write(static_cast<std::size_t>(task->mid()), mid_state);
      if (hooks.on_complete) hooks.on_complete(*task, mid_state);
      enqueue_children(queue, *task);
    }
    return;
  }

  std::mutex mu;
  std::condition_variable wake;
  std::exception_ptr failure;
  bool abort = false;

  auto loop = [&](Worker& worker) {
    for (;;) {
      SubtaskSpec task;
      {
        std::unique_lock lock(mu);
        wake.wait(lock, [&] { return abort || !queue.empty() || board.full(); });
        if (abort || queue.empty()) return;
        task = *queue.pop();
      }
      StateIndex mid_state = kUnsetState;
      try {
        if (hooks.on_dequeue) hooks.on_dequeue(task, board);
        mid_state = solve(worker, task, boundary(task),
                          board.read(static_cast<std::size_t>(task.end)));
        if (hooks.on_complete) hooks.on_complete(task, mid_state);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        wake.notify_all();
        return;
      }
      {
        // Publishing the state and its children under one lock keeps every
        // child behind its parent's output.
        std::lock_guard lock(mu);
        try {
          board.write(static_cast<std::size_t>(task.mid()), mid_state);
          enqueue_children(queue, task);
        } catch (...) {
          if (!failure) failure = std::current_exception();
          abort = true;
        }
      }
      wake.notify_all();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(workers.size());
    for (Worker& w : workers) threads.emplace_back(loop, std::ref(w));
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace flashvit::detail
