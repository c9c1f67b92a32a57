// SPDX-License-Identifier: Apache-2.0
#include "flashvit/runner.hpp"

#include <array>
#include <chrono>

#include <json.hpp>

#include "flashvit/baselines.hpp"
#include "flashvit/beam.hpp"
#include "flashvit/errors.hpp"
#include "flashvit/flash.hpp"

namespace flashvit {

namespace {

constexpr std::array<Algo, 6> kAlgos = {Algo::kVanilla,    Algo::kCheckpoint, Algo::kSieveMp,
                                        Algo::kStaticBeam, Algo::kFlash,      Algo::kFlashBs};

}  // namespace

std::span<const Algo> all_algos() { return kAlgos; }

std::string_view algo_name(Algo algo) {
  switch (algo) {
    case Algo::kVanilla: return "vanilla";
    case Algo::kCheckpoint: return "checkpoint";
    case Algo::kSieveMp: return "sieve-mp";
    case Algo::kStaticBeam: return "static-bs";
    case Algo::kFlash: return "flash";
    case Algo::kFlashBs: return "flash-bs";
  }
  return "unknown";
}

Algo parse_algo(std::string_view name) {
  for (Algo a : kAlgos) {
    if (algo_name(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

bool uses_beam(Algo algo) { return algo == Algo::kStaticBeam || algo == Algo::kFlashBs; }

bool uses_parallelism(Algo algo) { return algo == Algo::kFlash || algo == Algo::kFlashBs; }

bool is_exact(Algo algo) { return !uses_beam(algo); }

RunResult metered_run(Algo algo, const HmmModel& model, const ObservationSequence& obs,
                      const RunParams& params, Meter& meter) {
  const std::size_t beam = params.beam_width.value_or(model.num_states());
  RunResult result;
  const auto started = std::chrono::steady_clock::now();
  switch (algo) {
    case Algo::kVanilla: result.path = vanilla_viterbi(model, obs, &meter); break;
    case Algo::kCheckpoint: result.path = checkpoint_viterbi(model, obs, &meter); break;
    case Algo::kSieveMp: result.path = sieve_mp_decode(model, obs, &meter); break;
    case Algo::kStaticBeam: result.path = static_beam_decode(model, obs, beam, &meter); break;
    case Algo::kFlash: result.path = flash_decode(model, obs, params.parallelism, &meter); break;
    case Algo::kFlashBs:
      result.path = flash_bs_decode(model, obs, params.parallelism, beam, &meter);
      break;
  }
  const auto finished = std::chrono::steady_clock::now();
  result.timing.wall_seconds = std::chrono::duration<double>(finished - started).count();
  result.timing.dp_cell_updates = meter.dp_cell_updates();
  result.memory = meter.memory_report();
  result.inexact_tracebacks = meter.inexact_tracebacks();
  return result;
}

RunResult metered_run(Algo algo, const HmmModel& model, const ObservationSequence& obs,
                      const RunParams& params) {
  Meter meter;
  return metered_run(algo, model, obs, params, meter);
}

std::string to_json(const MemoryReport& report) {
  nlohmann::ordered_json j;
  for (std::size_t c = 0; c < kNumMemoryCategories; ++c) {
    const auto category = static_cast<MemoryCategory>(c);
    j[std::string(category_name(category))] = report.get(category);
  }
  j["peak_total"] = report.peak_total;
  return j.dump();
}

}  // namespace flashvit
