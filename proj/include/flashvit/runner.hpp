// SPDX-License-Identifier: Apache-2.0
#pragma once

// Uniform entry point over every decoder, with metering and wall-clock timing.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "flashvit/hmm_model.hpp"
#include "flashvit/metering.hpp"
#include "flashvit/oracle.hpp"

namespace flashvit {

enum class Algo { kVanilla, kCheckpoint, kSieveMp, kStaticBeam, kFlash, kFlashBs };

std::span<const Algo> all_algos();
std::string_view algo_name(Algo algo);
/// Accepts vanilla, checkpoint, sieve-mp, static-bs, flash, flash-bs.
Algo parse_algo(std::string_view name);
bool uses_beam(Algo algo);
bool uses_parallelism(Algo algo);
/// True for decoders that must return a maximum-likelihood path.
bool is_exact(Algo algo);

struct RunParams {
  std::size_t parallelism = 1;
  /// Defaults to K.
  std::optional<std::size_t> beam_width;
};

struct RunResult {
  DecodedPath path;
  MemoryReport memory;
  TimingReport timing;
  std::size_t inexact_tracebacks = 0;
};

/// Runs `algo` against `meter`, timing the decode call only. Decoder errors
/// propagate; the meter then holds the partial readings.
RunResult metered_run(Algo algo, const HmmModel& model, const ObservationSequence& obs,
                      const RunParams& params, Meter& meter);

/// Same, with a fresh meter.
RunResult metered_run(Algo algo, const HmmModel& model, const ObservationSequence& obs,
                      const RunParams& params = {});

/// Flat JSON object with one field per memory category plus peak_total.
std::string to_json(const MemoryReport& report);

}  // namespace flashvit
