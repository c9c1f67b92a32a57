// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>

#include "flashvit/baselines.hpp"
#include "flashvit/errors.hpp"
#include "flashvit/flash.hpp"
#include "flashvit/oracle.hpp"
#include "test_support.hpp"

using namespace flashvit;

namespace {

std::size_t ceil_log2(std::size_t n) {
  std::size_t r = 0;
  while ((std::size_t{1} << r) < n) ++r;
  return r;
}

std::size_t floor_log2(std::size_t n) {
  std::size_t r = 0;
  while ((std::size_t{2} << r) <= n) ++r;
  return r;
}

}  // namespace

TEST_CASE("plan_segments") {
  CHECK(plan_segments(16, 4) == std::vector<std::size_t>{3, 7, 11});
  CHECK(plan_segments(10, 4) == std::vector<std::size_t>{2, 5, 7});
  CHECK(plan_segments(5, 5) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(plan_segments(7, 1).empty());
  CHECK_THROWS_AS(plan_segments(4, 5), ConfigError);
  CHECK_THROWS_AS(plan_segments(4, 0), ConfigError);

  std::mt19937_64 rng(3);
  for (int n = 0; n < 200; ++n) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const std::size_t p = std::uniform_int_distribution<std::size_t>(1, t)(rng);
    const auto b = plan_segments(t, p);
    REQUIRE(b.size() == p - 1);
    std::size_t prev_end = 0;
    std::size_t shortest = t, longest = 0;
    for (std::size_t j = 0; j <= b.size(); ++j) {
      const std::size_t end = j < b.size() ? b[j] + 1 : t;
      const std::size_t len = end - prev_end;
      shortest = std::min(shortest, len);
      longest = std::max(longest, len);
      if (j > 0 && j < b.size()) CHECK(len <= end - prev_end);
      prev_end = end;
    }
    CHECK(longest - shortest <= 1);
    CHECK(shortest >= 1);
  }
}

TEST_CASE("initial division points") {
  CHECK(initial_division_points(3, 1) == std::vector<std::size_t>{1});
  CHECK(initial_division_points(2, 1) == std::vector<std::size_t>{0});
  CHECK(initial_division_points(9, 1) == std::vector<std::size_t>{4});
  CHECK(initial_division_points(1, 1).empty());
  CHECK(initial_division_points(16, 4) == plan_segments(16, 4));
}

TEST_CASE("initial task emits vanilla states") {
  SUBCASE("H2 with the midpoint") {
    const auto h2 = testing::h2_model();
    const ObservationSequence obs({0, 1, 0});
    const auto v = vanilla_viterbi(h2, obs);
    const std::size_t d[] = {1};
    const auto r = decode_initial_task(h2, obs, d);
    CHECK(r.final_state == v.states[2]);
    CHECK(r.division_states == std::vector<StateIndex>{v.states[1]});
  }
  SUBCASE("identity model") {
    const std::size_t d[] = {1, 3, 5};
    const auto r = decode_initial_task(testing::identity_model(), ObservationSequence(std::vector<Symbol>(8, 0)), d);
    CHECK(r.final_state == 0);
    CHECK(r.division_states == std::vector<StateIndex>{0, 0, 0});
  }
  SUBCASE("K=16, T=256, P=4 and P=8") {
    const auto inst = testing::make_instance(16, 6, 256, 0.3, 9);
    const auto v = vanilla_viterbi(inst.model, inst.obs);
    for (std::size_t p : {4, 8}) {
      const auto d = plan_segments(256, p);
      const auto r = decode_initial_task(inst.model, inst.obs, d);
      CHECK(r.final_state == v.states.back());
      for (std::size_t j = 0; j < d.size(); ++j) CHECK(r.division_states[j] == v.states[d[j]]);
    }
  }
  SUBCASE("rejected division points") {
    const auto inst = testing::make_instance(4, 3, 10, 0.5, 1);
    const std::size_t last[] = {9};
    const std::size_t unsorted[] = {5, 3};
    CHECK_THROWS_AS(decode_initial_task(inst.model, inst.obs, last), ConfigError);
    CHECK_THROWS_AS(decode_initial_task(inst.model, inst.obs, unsorted), ConfigError);
  }
}

TEST_CASE("decode_subtask") {
  SUBCASE("n - m = 1 on H2") {
    const auto h2 = testing::h2_model();
    const ObservationSequence obs({0, 1, 0});
    const auto v = vanilla_viterbi(h2, obs);
    CHECK(decode_subtask(h2, obs, 1, 2, v.states[0], v.states[2]) == v.states[1]);
    CHECK(decode_subtask(h2, obs, 0, 1, std::nullopt, v.states[1]) == v.states[0]);
  }
  SUBCASE("identity model") {
    const auto m = testing::identity_model(3);
    const ObservationSequence obs(std::vector<Symbol>(12, 0));
    for (std::size_t s = 1; s < 11; ++s) {
      for (std::size_t e = s + 1; e < 12; ++e) CHECK(decode_subtask(m, obs, s, e, 0, 0) == 0);
    }
  }
  SUBCASE("MidState stays UNSET through the midpoint") {
    const auto inst = testing::make_instance(10, 4, 40, 0.4, 2);
    const auto v = vanilla_viterbi(inst.model, inst.obs);
    const std::size_t m = 5, n = 30, mid = (m + n) / 2;
    std::size_t calls = 0;
    const auto got = decode_subtask(
        inst.model, inst.obs, m, n, v.states[m - 1], v.states[n], nullptr,
        [&](std::size_t t, std::span<const StateIndex> mids) {
          ++calls;
          for (StateIndex s : mids) {
            if (t <= mid) {
              CHECK(s == kUnsetState);
            } else {
              CHECK(s >= kUnsetState);
              CHECK(s < 10);
            }
          }
        });
    CHECK(calls == n - m + 1);
    CHECK(got == v.states[mid]);
  }
  SUBCASE("argument checks") {
    const auto inst = testing::make_instance(4, 3, 10, 0.5, 1);
    CHECK_THROWS_AS(decode_subtask(inst.model, inst.obs, 3, 3, 0, 0), ConfigError);
    CHECK_THROWS_AS(decode_subtask(inst.model, inst.obs, 3, 10, 0, 0), ConfigError);
    CHECK_THROWS_AS(decode_subtask(inst.model, inst.obs, 3, 5, std::nullopt, 0), ConfigError);
    CHECK_THROWS_AS(decode_subtask(inst.model, inst.obs, 0, 5, 1, 0), ConfigError);
    CHECK_THROWS_AS(decode_subtask(inst.model, inst.obs, 2, 5, 4, 0), ConfigError);
  }
  SUBCASE("unreachable end state") {
    const auto m = testing::identity_model(2);
    const ObservationSequence obs({0, 0, 0, 0});
    CHECK_THROWS_AS(decode_subtask(m, obs, 1, 3, 0, 1), InternalConsistencyError);
  }
}

TEST_CASE("every subtask of a full decode emits the vanilla state") {
  const auto inst = testing::make_instance(16, 6, 256, 0.3, 9);
  const auto v = vanilla_viterbi(inst.model, inst.obs);
  for (std::size_t p : {1, 2, 4, 8}) {
    std::mutex mu;
    std::size_t completed = 0;
    std::atomic<bool> ordering_ok{true};
    SchedulerHooks hooks;
    hooks.on_dequeue = [&](const SubtaskSpec& task, const OutputBoard& board) {
      if (!board.is_set(static_cast<std::size_t>(task.end))) ordering_ok = false;
      if (task.start > 0 && !board.is_set(static_cast<std::size_t>(task.start - 1))) ordering_ok = false;
      if (board.is_set(static_cast<std::size_t>(task.mid()))) ordering_ok = false;
    };
    hooks.on_complete = [&](const SubtaskSpec& task, StateIndex mid) {
      std::lock_guard lock(mu);
      ++completed;
      CHECK(mid == v.states[static_cast<std::size_t>(task.mid())]);
    };
    const auto path = flash_decode(inst.model, inst.obs, p, nullptr, hooks);
    CHECK(path.states == v.states);
    CHECK(ordering_ok.load());
    // Every worker subtask emits exactly one of the T - P states left over.
    CHECK(completed == 256 - std::max<std::size_t>(p, 2));
  }
}

TEST_CASE("degenerate lengths need no worker subtasks") {
  const auto h2 = testing::h2_model();
  for (std::size_t t : {1, 2}) {
    std::vector<Symbol> x(t, 1);
    int dequeued = 0;
    SchedulerHooks hooks;
    hooks.on_dequeue = [&](const SubtaskSpec&, const OutputBoard&) { ++dequeued; };
    const auto path = flash_decode(h2, ObservationSequence(x), 1, nullptr, hooks);
    CHECK(path.states == vanilla_viterbi(h2, ObservationSequence(x)).states);
    CHECK(dequeued == 0);
  }
  const ObservationSequence five({0, 1, 1, 0, 1});
  CHECK(flash_decode(h2, five, 5).states == vanilla_viterbi(h2, five).states);
}

// Small random models often contain exact real-valued ties (the same factors
// visited in a rotated order); rounding then decides between the tied paths,
// and it differs between decoders because pruned subtasks drop the boundary
// offset. Paths are compared only where the optimum is unique.
TEST_CASE("flash equals vanilla on 300 random instances and across P") {
  std::mt19937_64 rng(11);
  int unique = 0;
  for (int n = 0; n < 300; ++n) {
    const auto inst = testing::random_instance(rng, 2, 32, 2, 128);
    const auto v = vanilla_viterbi(inst.model, inst.obs);
    const bool tie_free = testing::optimum_is_unique(inst.model, inst.obs, 1e-9);
    unique += tie_free ? 1 : 0;
    for (std::size_t p : {1, 2, 4, 8}) {
      if (p > inst.obs.size()) continue;
      const auto f = flash_decode(inst.model, inst.obs, p);
      CHECK(std::abs(f.log_likelihood - v.log_likelihood) <= 1e-9);
      if (tie_free) CHECK(f.states == v.states);
    }
  }
  CHECK(unique >= 270);
}

TEST_CASE("tie oracle flags a rotated cycle") {
  // Two states with identical emissions and a symmetric two-cycle: 0,1 and
  // 1,0 score the same.
  const double pi[] = {0.5, 0.5};
  const double a[] = {0.5, 0.5, 0.5, 0.5};
  const double b[] = {0.3, 0.7, 0.3, 0.7};
  const auto m = HmmModel::from_probabilities(2, 2, pi, a, b);
  CHECK_FALSE(testing::optimum_is_unique(m, ObservationSequence({0, 1}), 1e-9));
  CHECK(testing::optimum_is_unique(testing::h2_model(), ObservationSequence({0, 1, 0}), 1e-9));
}

TEST_CASE("work bound and pruning saving") {
  for (std::size_t t : {8, 9, 64, 100, 257}) {
    const auto inst = testing::make_instance(12, 4, t, 1.0, t);
    Meter sieve;
    sieve_mp_decode(inst.model, inst.obs, &sieve);
    for (std::size_t p : {1, 2, 4, 8}) {
      Meter meter;
      flash_decode(inst.model, inst.obs, p, &meter);
      const std::uint64_t k2t = 12 * 12 * t;
      CHECK(meter.dp_cell_updates() <= k2t * (ceil_log2(t) - floor_log2(p) + 1));
      if (p == 1) CHECK(meter.dp_cell_updates() < sieve.dp_cell_updates());
    }
  }
}

TEST_CASE("flash scratch is constant across T") {
  for (std::size_t p : {1, 4}) {
    std::optional<MemoryReport> first;
    for (std::size_t t : {128, 256, 512, 1024, 2048}) {
      const auto inst = testing::make_instance(16, 5, t, 0.3, 1);
      Meter meter;
      flash_decode(inst.model, inst.obs, p, &meter);
      const auto r = meter.memory_report();
      CHECK(r.psi_table_bytes == 0);
      CHECK(r.checkpoint_bytes == 0);
      CHECK(r.recursion_bytes == 0);
      if (!first) {
        first = r;
      } else {
        CHECK(r.scratch_prob == first->scratch_prob);
        CHECK(r.scratch_state == first->scratch_state);
      }
    }
  }
}

TEST_CASE("flash errors") {
  const auto id = testing::identity_model();
  CHECK_THROWS_AS(flash_decode(id, ObservationSequence({0, 1, 0}), 1), InfeasibleDecode);
  CHECK_THROWS_AS(flash_decode(id, ObservationSequence({0, 0}), 3), ConfigError);
  CHECK_THROWS_AS(flash_decode(id, ObservationSequence({0, 0}), 0), ConfigError);

  const auto inst = testing::make_instance(8, 3, 64, 0.5, 2);
  for (std::size_t p : {1, 4}) {
    SchedulerHooks hooks;
    std::atomic<int> n{0};
    hooks.on_complete = [&](const SubtaskSpec&, StateIndex) {
      if (++n == 5) throw std::runtime_error("hook failure");
    };
    CHECK_THROWS_AS(flash_decode(inst.model, inst.obs, p, nullptr, hooks), std::runtime_error);
  }
}

TEST_CASE("task queue and output board") {
  Meter meter;
  {
    TaskQueue q(2, &meter);
    CHECK(meter.live_total() == 16);
    q.push({0, 3});
    q.push({4, 9});
    CHECK_THROWS_AS(q.push({1, 2}), InternalConsistencyError);
    CHECK(q.pop() == SubtaskSpec{0, 3});
    q.push({1, 2});
    CHECK(q.pop() == SubtaskSpec{4, 9});
    CHECK(q.pop() == SubtaskSpec{1, 2});
    CHECK_FALSE(q.pop().has_value());
    CHECK(q.dequeued() == 3);
  }
  CHECK(meter.live_total() == 0);

  OutputBoard board(3);
  board.write(1, 5);
  CHECK(board.is_set(1));
  CHECK_FALSE(board.full());
  CHECK_THROWS_AS(board.write(1, 4), InternalConsistencyError);
  CHECK_THROWS_AS(board.write(0, kUnsetState), InternalConsistencyError);
  board.write(0, 0);
  board.write(2, 2);
  CHECK(board.full());
  CHECK(board.snapshot() == std::vector<StateIndex>{0, 5, 2});
  CHECK(SubtaskSpec{4, 9}.mid() == 6);
}
