// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "flashvit/errors.hpp"
#include "flashvit/oracle.hpp"
#include "test_support.hpp"

using namespace flashvit;

namespace {

// Linear-domain score of one path, written out independently of path_score.
double linear_path_prob(const std::vector<double>& pi, const std::vector<double>& a,
                        const std::vector<double>& b, std::size_t k, std::size_t m,
                        const std::vector<int>& obs, const std::vector<int>& path) {
  double p = pi[path[0]] * b[path[0] * m + obs[0]];
  for (std::size_t t = 1; t < path.size(); ++t) {
    p *= a[path[t - 1] * k + path[t]] * b[path[t] * m + obs[t]];
  }
  return p;
}

}  // namespace

TEST_CASE("identity model decodes the forced path") {
  const auto m = testing::identity_model();
  const ObservationSequence obs({0, 0, 0});
  const auto path = vanilla_viterbi(m, obs);
  CHECK(path.states == std::vector<StateIndex>{0, 0, 0});
  CHECK(path.log_likelihood == 0.0);
}

TEST_CASE("H2 decode matches an explicit enumeration of all eight paths") {
  const std::vector<double> pi = {0.6, 0.4}, a = {0.7, 0.3, 0.4, 0.6}, b = {0.9, 0.1, 0.2, 0.8};
  const std::vector<int> x = {0, 1, 0};
  double best = -1.0;
  std::vector<int> best_path;
  for (int code = 0; code < 8; ++code) {
    const std::vector<int> path = {(code >> 2) & 1, (code >> 1) & 1, code & 1};
    const double p = linear_path_prob(pi, a, b, 2, 2, x, path);
    if (p > best) {
      best = p;
      best_path = path;
    }
  }
  const auto model = testing::h2_model();
  const ObservationSequence obs({0, 1, 0});
  const auto v = vanilla_viterbi(model, obs);
  const auto bf = brute_force_decode(model, obs);
  CHECK(v.log_likelihood == doctest::Approx(std::log(best)).epsilon(1e-12));
  CHECK(bf.log_likelihood == doctest::Approx(std::log(best)).epsilon(1e-12));
  CHECK(v.states == std::vector<StateIndex>(best_path.begin(), best_path.end()));
  CHECK(bf.states == v.states);
}

TEST_CASE("unreachable observation is infeasible") {
  const auto m = testing::identity_model();
  CHECK_THROWS_AS(vanilla_viterbi(m, ObservationSequence({1})), InfeasibleDecode);
  CHECK_THROWS_AS(vanilla_viterbi(m, ObservationSequence({0, 1, 0})), InfeasibleDecode);
  CHECK_THROWS_AS(brute_force_decode(m, ObservationSequence({0, 1})), InfeasibleDecode);
}

TEST_CASE("brute force basics") {
  SUBCASE("single state") {
    const double one[] = {1.0};
    const double b[] = {0.5, 0.5};
    const auto m = HmmModel::from_probabilities(1, 2, one, one, b);
    const auto p = brute_force_decode(m, ObservationSequence({0, 1, 1, 0, 1, 0}));
    CHECK(p.states == std::vector<StateIndex>(6, 0));
  }
  SUBCASE("agrees with vanilla on K=3, T=4") {
    const auto inst = testing::make_instance(3, 3, 4, 0.6, 11);
    const auto bf = brute_force_decode(inst.model, inst.obs);
    const auto v = vanilla_viterbi(inst.model, inst.obs);
    CHECK(std::abs(bf.log_likelihood - v.log_likelihood) <= 1e-9);
  }
  SUBCASE("cap") {
    const auto inst = testing::make_instance(5, 3, 9, 0.5, 1);
    CHECK_THROWS_AS(brute_force_decode(inst.model, inst.obs), EnumerationCapExceeded);
    CHECK_NOTHROW(brute_force_decode(inst.model, inst.obs, 2'000'000));
  }
}

TEST_CASE("ties resolve to the lowest state index") {
  const double pi[] = {0.5, 0.5};
  const double a[] = {0.5, 0.5, 0.5, 0.5};
  const double b[] = {0.5, 0.5, 0.5, 0.5};
  const auto m = HmmModel::from_probabilities(2, 2, pi, a, b);
  const ObservationSequence obs({0, 1, 1, 0});
  CHECK(vanilla_viterbi(m, obs).states == std::vector<StateIndex>(4, 0));
  CHECK(brute_force_decode(m, obs).states == std::vector<StateIndex>(4, 0));
}

TEST_CASE("path_score") {
  const auto h2 = testing::h2_model();
  const ObservationSequence obs({0, 1, 0});
  CHECK(path_score(testing::identity_model(), ObservationSequence({0, 0, 0}),
                   std::vector<StateIndex>{0, 0, 0}) == 0.0);
  CHECK(path_score(h2, obs, std::vector<StateIndex>{0, 0, 0}) ==
        doctest::Approx(std::log(0.6 * 0.9 * 0.7 * 0.1 * 0.7 * 0.9)).epsilon(1e-12));
  CHECK(path_score(testing::identity_model(), ObservationSequence({0, 0}),
                   std::vector<StateIndex>{0, 1}) == kNegInf);
  CHECK_THROWS_AS(path_score(h2, obs, std::vector<StateIndex>{0, 0}), ConfigError);
  CHECK_THROWS_AS(path_score(h2, obs, std::vector<StateIndex>{0, 2, 0}), ConfigError);
}

TEST_CASE("vanilla equals brute force on 300 small random instances") {
  std::mt19937_64 rng(300);
  for (int n = 0; n < 300; ++n) {
    const auto inst = testing::random_instance(rng, 1, 4, 1, 8);
    const auto v = vanilla_viterbi(inst.model, inst.obs);
    const auto bf = brute_force_decode(inst.model, inst.obs);
    CHECK(std::abs(v.log_likelihood - bf.log_likelihood) <= 1e-9);
    CHECK(v.states == bf.states);
    CHECK(v.log_likelihood == path_score(inst.model, inst.obs, v.states));
  }
}

TEST_CASE("vanilla dominates random feasible paths") {
  const auto inst = testing::make_instance(12, 5, 30, 0.3, 77);
  const auto v = vanilla_viterbi(inst.model, inst.obs);
  std::mt19937_64 rng(5);
  const std::size_t k = inst.model.num_states();
  for (int n = 0; n < 100; ++n) {
    std::vector<StateIndex> path;
    std::vector<StateIndex> candidates;
    for (std::size_t i = 0; i < k; ++i) {
      if (inst.model.initial(static_cast<StateIndex>(i)) != kNegInf) candidates.push_back(static_cast<StateIndex>(i));
    }
    for (std::size_t t = 0; t < inst.obs.size(); ++t) {
      path.push_back(candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)]);
      candidates.clear();
      for (std::size_t j = 0; j < k; ++j) {
        if (inst.model.transition(path.back(), static_cast<StateIndex>(j)) != kNegInf) {
          candidates.push_back(static_cast<StateIndex>(j));
        }
      }
    }
    const double s = path_score(inst.model, inst.obs, path);
    REQUIRE(std::isfinite(s));
    CHECK(v.log_likelihood >= s);
  }
}

TEST_CASE("vanilla meter readings") {
  const auto inst = testing::make_instance(8, 4, 16, 1.0, 3);
  Meter meter;
  vanilla_viterbi(inst.model, inst.obs, &meter);
  const auto r = meter.memory_report();
  CHECK(r.psi_table_bytes == 4 * 8 * 16);
  CHECK(r.scratch_prob == 8 * 2 * 8);
  CHECK(meter.dp_cell_updates() == 8 + 64 * 15);
  CHECK(meter.live_total() == 0);
}
