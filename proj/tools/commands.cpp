// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flashvit/beam.hpp"
#include "flashvit/errors.hpp"
#include "flashvit/hmm_model.hpp"
#include "flashvit/oracle.hpp"
#include "flashvit/runner.hpp"

namespace flashvit::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kScoreTolerance = 1e-9;

struct InstanceFlags {
  std::size_t states = 512;
  std::size_t symbols = 50;
  std::size_t timesteps = 512;
  double edge_prob = 0.253;
  std::uint64_t seed = 0;
};

struct Instance {
  HmmModel model;
  ObservationSequence obs;
};

void add_instance_flags(CLI::App* app, InstanceFlags& f) {
  app->add_option("--states", f.states, "number of hidden states K")->capture_default_str();
  app->add_option("--symbols", f.symbols, "number of observation symbols M")->capture_default_str();
  app->add_option("--timesteps", f.timesteps, "sequence length T")->capture_default_str();
  app->add_option("--edge-prob", f.edge_prob, "Erdos-Renyi edge probability p")->capture_default_str();
  app->add_option("--seed", f.seed, "master seed")->capture_default_str();
}

// Model and observations both derive from one instance seed.
Instance make_instance(const InstanceFlags& f, std::uint64_t seed) {
  GeneratorConfig config;
  config.num_states = f.states;
  config.num_symbols = f.symbols;
  config.seq_len = f.timesteps;
  config.edge_prob = f.edge_prob;
  config.seed = derive_seed(seed, 0);
  HmmModel model = generate_er_hmm(config);
  ObservationSequence obs = sample_observations(model, f.timesteps, derive_seed(seed, 1));
  return {std::move(model), std::move(obs)};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

std::optional<double> eta_of(double opt, double score) {
  if (opt == 0.0 || !std::isfinite(opt)) return std::nullopt;
  return relative_error(opt, score);
}

// Decoder outcome with the meter readings captured even on failure.
struct Outcome {
  std::string status = "ok";
  std::string message;
  std::optional<DecodedPath> path;
  MemoryReport memory;
  TimingReport timing;
  std::size_t inexact_tracebacks = 0;
};

Outcome run_decoder(Algo algo, const Instance& inst, const RunParams& params,
                    std::size_t timing_runs) {
  Outcome outcome;
  std::vector<double> walls;
  for (std::size_t r = 0; r < timing_runs; ++r) {
    Meter meter;
    try {
      RunResult result = metered_run(algo, inst.model, inst.obs, params, meter);
      walls.push_back(result.timing.wall_seconds);
      if (r == 0) {
        outcome.path = std::move(result.path);
        outcome.memory = result.memory;
        outcome.timing = result.timing;
        outcome.inexact_tracebacks = result.inexact_tracebacks;
      }
    } catch (const InfeasibleDecode& e) {
      outcome.status = "infeasible";
      outcome.message = e.what();
    } catch (const BeamExhausted& e) {
      outcome.status = "beam-exhausted";
      outcome.message = e.what();
    }
    if (outcome.status != "ok") {
      outcome.memory = meter.memory_report();
      outcome.timing.dp_cell_updates = meter.dp_cell_updates();
      outcome.inexact_tracebacks = meter.inexact_tracebacks();
      return outcome;
    }
  }
  std::sort(walls.begin(), walls.end());
  outcome.timing.wall_seconds = walls[walls.size() / 2];
  return outcome;
}

int status_exit_code(const Outcome& outcome) {
  if (outcome.status == "infeasible") return kExitInfeasible;
  if (outcome.status == "beam-exhausted") return kExitBeamExhausted;
  return kExitOk;
}

void write_path_file(const std::filesystem::path& path, const DecodedPath& decoded) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  for (StateIndex s : decoded.states) f << s << '\n';
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

void emit_records(const std::vector<std::string>& columns, const std::vector<Json>& rows,
                  const std::string& format, std::ostream& out) {
  if (format == "json") {
    Json arr = Json::array();
    for (const auto& r : rows) arr.push_back(r);
    out << (rows.size() == 1 ? rows.front().dump(2) : arr.dump(2)) << '\n';
    return;
  }
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      const auto it = row.find(columns[c]);
      if (it == row.end() || it->is_null()) continue;
      if (it->is_string()) {
        out << it->get<std::string>();
      } else if (it->is_number_float()) {
        out << format_number(it->get<double>());
      } else {
        out << it->dump();
      }
    }
    out << '\n';
  }
}

// Fills the meter, score and optional verification fields of one record.
void fill_outcome(Json& row, const Outcome& outcome, std::optional<double> opt_score) {
  row["status"] = outcome.status;
  row["wall_seconds"] = outcome.timing.wall_seconds;
  row["dp_cell_updates"] = outcome.timing.dp_cell_updates;
  for (std::size_t c = 0; c < kNumMemoryCategories; ++c) {
    const auto category = static_cast<MemoryCategory>(c);
    row[std::string(category_name(category))] = outcome.memory.get(category);
  }
  row["peak_total"] = outcome.memory.peak_total;
  row["inexact_tracebacks"] = outcome.inexact_tracebacks;
  row["score"] = outcome.path ? json_number(outcome.path->log_likelihood) : Json();
  row["opt_score"] = opt_score ? json_number(*opt_score) : Json();
  row["score_delta"] = Json();
  row["eta"] = Json();
  if (opt_score && outcome.path) {
    row["score_delta"] = json_number(*opt_score - outcome.path->log_likelihood);
    if (const auto eta = eta_of(*opt_score, outcome.path->log_likelihood)) row["eta"] = json_number(*eta);
  }
}

std::vector<std::string> record_columns(std::initializer_list<const char*> leading) {
  std::vector<std::string> cols(leading.begin(), leading.end());
  for (const char* c : {"status", "wall_seconds", "dp_cell_updates"}) cols.emplace_back(c);
  for (std::size_t c = 0; c < kNumMemoryCategories; ++c) {
    cols.emplace_back(category_name(static_cast<MemoryCategory>(c)));
  }
  for (const char* c : {"peak_total", "inexact_tracebacks", "score", "opt_score", "score_delta", "eta"}) {
    cols.emplace_back(c);
  }
  return cols;
}

// ---- gen -------------------------------------------------------------------

struct GenFlags {
  InstanceFlags instance;
  std::string model_path = "model.json";
  std::string obs_path = "obs.json";
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
  Instance inst = make_instance(f.instance, f.instance.seed);
  save_model(inst.model, f.model_path);
  save_observations(inst.obs, f.obs_path);
  std::size_t edges = 0;
  for (double v : inst.model.log_transition()) edges += v != kNegInf ? 1 : 0;
  out << "model K=" << inst.model.num_states() << " M=" << inst.model.num_symbols()
      << " edges=" << edges << " -> " << f.model_path << "; observations T=" << inst.obs.size()
      << " -> " << f.obs_path << '\n';
  return kExitOk;
}

// ---- decode ----------------------------------------------------------------

struct DecodeFlags {
  std::string model_path;
  std::string obs_path;
  std::string algo = "flash";
  std::size_t parallel = 1;
  std::size_t beam = 0;
  bool beam_set = false;
  std::string out_path;
  std::string format = "json";
  bool verify = false;
};

int cmd_decode(const DecodeFlags& f, std::ostream& out, std::ostream& err) {
  const Algo algo = parse_algo(f.algo);
  Instance inst{load_model(f.model_path), load_observations(f.obs_path)};
  inst.obs.validate_against(inst.model);
  RunParams params;
  params.parallelism = f.parallel;
  if (f.beam_set) params.beam_width = f.beam;

  const Outcome outcome = run_decoder(algo, inst, params, 1);
  if (outcome.status != "ok") {
    err << "error: " << outcome.message << '\n'
        << "partial meters: " << to_json(outcome.memory) << '\n';
    return status_exit_code(outcome);
  }
  std::optional<double> opt;
  if (f.verify) opt = vanilla_viterbi(inst.model, inst.obs).log_likelihood;
  if (!f.out_path.empty()) write_path_file(f.out_path, *outcome.path);

  Json row;
  row["algo"] = algo_name(algo);
  row["states"] = inst.model.num_states();
  row["symbols"] = inst.model.num_symbols();
  row["timesteps"] = inst.obs.size();
  row["parallel"] = uses_parallelism(algo) ? Json(params.parallelism) : Json();
  row["beam"] = uses_beam(algo) ? Json(params.beam_width.value_or(inst.model.num_states())) : Json();
  fill_outcome(row, outcome, opt);
  emit_records(record_columns({"algo", "states", "symbols", "timesteps", "parallel", "beam"}),
               {row}, f.format, out);
  return kExitOk;
}

// ---- sweep -----------------------------------------------------------------

const std::vector<std::string> kAxes = {"states", "timesteps", "edge-prob", "beam", "parallel"};

struct SweepFlags {
  InstanceFlags instance;
  std::string axis;
  std::vector<std::string> values;
  std::vector<std::string> algos = {"flash"};
  std::size_t parallel = 1;
  std::size_t beam = 0;
  bool beam_set = false;
  std::size_t reps = 1;
  std::size_t timing_runs = 3;
  bool verify = false;
  std::uint64_t verify_cap = std::uint64_t{1} << 20;
  std::string out_path;
  std::string format = "csv";
};

std::vector<std::string> default_values(const std::string& axis, const InstanceFlags& base) {
  std::vector<std::string> v;
  if (axis == "states" || axis == "timesteps") {
    for (std::size_t x = 32; x <= 2048; x *= 2) v.push_back(std::to_string(x));
  } else if (axis == "beam") {
    for (std::size_t b = 1024; b >= 32; b /= 2) {
      if (b <= base.states) v.push_back(std::to_string(b));
    }
  } else if (axis == "edge-prob") {
    for (double p = 0.05; p < 1.0; p *= 1.5) v.push_back(format_number(p));
    v.push_back("1");
  } else if (axis == "parallel") {
    for (std::size_t p = 1; p <= 16; p *= 2) {
      if (p <= base.timesteps) v.push_back(std::to_string(p));
    }
  }
  return v;
}

std::size_t parse_count(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s.front() == '-') {
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

int cmd_sweep(const SweepFlags& f, std::ostream& out) {
  std::vector<Algo> algos;
  for (const auto& name : f.algos) algos.push_back(parse_algo(name));
  for (Algo a : algos) {
    if (f.axis == "beam" && !uses_beam(a)) {
      throw ConfigError("axis 'beam' is undefined for algorithm '" + std::string(algo_name(a)) + "'");
    }
    if (f.axis == "parallel" && !uses_parallelism(a)) {
      throw ConfigError("axis 'parallel' is undefined for algorithm '" + std::string(algo_name(a)) + "'");
    }
  }
  if (f.reps < 1) throw ConfigError("--reps must be >= 1");
  if (f.timing_runs < 1) throw ConfigError("--timing-runs must be >= 1");
  const auto values = f.values.empty() ? default_values(f.axis, f.instance) : f.values;

  std::vector<Json> rows;
  for (const auto& value : values) {
    InstanceFlags inst_flags = f.instance;
    RunParams params;
    params.parallelism = f.parallel;
    if (f.beam_set) params.beam_width = f.beam;
    if (f.axis == "states") inst_flags.states = parse_count(value);
    if (f.axis == "timesteps") inst_flags.timesteps = parse_count(value);
    if (f.axis == "edge-prob") inst_flags.edge_prob = parse_real(value);
    if (f.axis == "beam") params.beam_width = parse_count(value);
    if (f.axis == "parallel") params.parallelism = parse_count(value);

    for (std::size_t rep = 0; rep < f.reps; ++rep) {
      const std::uint64_t seed = derive_seed(f.instance.seed, rep);
      const Instance inst = make_instance(inst_flags, seed);
      std::optional<double> opt;
      if (f.verify && inst_flags.states * inst_flags.timesteps <= f.verify_cap) {
        try {
          opt = vanilla_viterbi(inst.model, inst.obs).log_likelihood;
        } catch (const InfeasibleDecode&) {
          opt = kNegInf;
        }
      }
      for (Algo algo : algos) {
        const Outcome outcome = run_decoder(algo, inst, params, f.timing_runs);
        Json row;
        row["axis"] = f.axis;
        row["algo"] = algo_name(algo);
        row["states"] = inst_flags.states;
        row["symbols"] = inst_flags.symbols;
        row["timesteps"] = inst_flags.timesteps;
        row["edge_prob"] = inst_flags.edge_prob;
        row["beam"] = uses_beam(algo) ? Json(params.beam_width.value_or(inst_flags.states)) : Json();
        row["parallel"] = uses_parallelism(algo) ? Json(params.parallelism) : Json();
        row["seed"] = seed;
        row["rep"] = rep;
        fill_outcome(row, outcome, opt);
        rows.push_back(std::move(row));
      }
    }
  }

  if (f.out_path.empty()) {
    emit_records(sweep_columns(), rows, f.format, out);
  } else {
    std::ofstream file(f.out_path);
    if (!file) throw IoError("cannot open '" + f.out_path + "' for writing");
    emit_records(sweep_columns(), rows, f.format, file);
    out << "wrote " << rows.size() << " rows to " << f.out_path << '\n';
  }
  return kExitOk;
}

// ---- verify ----------------------------------------------------------------

struct VerifyFlags {
  InstanceFlags instance;
  std::string model_path;
  std::string obs_path;
  std::vector<std::string> algos;
  std::size_t parallel = 1;
  std::size_t beam = 0;
  bool beam_set = false;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
};

int cmd_verify(const VerifyFlags& f, std::ostream& out) {
  if (f.model_path.empty() != f.obs_path.empty()) {
    throw ConfigError("--model and --obs must be given together");
  }
  const Instance inst = f.model_path.empty()
                            ? make_instance(f.instance, f.instance.seed)
                            : Instance{load_model(f.model_path), load_observations(f.obs_path)};
  inst.obs.validate_against(inst.model);

  std::vector<Algo> algos;
  if (f.algos.empty()) {
    algos.assign(all_algos().begin(), all_algos().end());
  } else {
    for (const auto& name : f.algos) algos.push_back(parse_algo(name));
  }
  RunParams params;
  params.parallelism = f.parallel;
  if (f.beam_set) params.beam_width = f.beam;

  const DecodedPath reference = vanilla_viterbi(inst.model, inst.obs);
  out << "vanilla score=" << format_number(reference.log_likelihood) << '\n';
  bool ok = true;
  try {
    const DecodedPath brute = brute_force_decode(inst.model, inst.obs, f.enumeration_cap);
    const bool match = std::abs(brute.log_likelihood - reference.log_likelihood) <= kScoreTolerance;
    out << "brute-force score=" << format_number(brute.log_likelihood)
        << (match ? " OK" : " MISMATCH") << '\n';
    ok = ok && match;
  } catch (const EnumerationCapExceeded&) {
    out << "brute-force skipped (K^T above enumeration cap)\n";
  }

  for (Algo algo : algos) {
    const Outcome outcome = run_decoder(algo, inst, params, 1);
    out << algo_name(algo);
    if (outcome.status != "ok") {
      out << ' ' << outcome.status << '\n';
      ok = false;
      continue;
    }
    const double score = outcome.path->log_likelihood;
    const double delta = reference.log_likelihood - score;
    out << " score=" << format_number(score) << " delta=" << format_number(delta);
    bool pass = false;
    if (is_exact(algo)) {
      const bool same_path = outcome.path->states == reference.states;
      out << " path=" << (same_path ? "identical" : "differs");
      pass = same_path && std::abs(delta) <= kScoreTolerance;
    } else {
      if (const auto eta = eta_of(reference.log_likelihood, score)) out << " eta=" << format_number(*eta);
      if (outcome.inexact_tracebacks > 0) out << " inexact_tracebacks=" << outcome.inexact_tracebacks;
      pass = delta >= -kScoreTolerance;
    }
    out << (pass ? " OK" : " MISMATCH") << '\n';
    ok = ok && pass;
  }
  return ok ? kExitOk : kExitMismatch;
}

}  // namespace

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> columns = record_columns(
      {"axis", "algo", "states", "symbols", "timesteps", "edge_prob", "beam", "parallel", "seed", "rep"});
  return columns;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FLASH Viterbi decoders and benchmark harness", "flashvit"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a random model and observation sequence");
  add_instance_flags(gen_cmd, gen.instance);
  gen_cmd->add_option("--model", gen.model_path, "model output file")->capture_default_str();
  gen_cmd->add_option("--obs", gen.obs_path, "observation output file")->capture_default_str();

  DecodeFlags dec;
  auto* dec_cmd = app.add_subcommand("decode", "decode an observation file");
  dec_cmd->add_option("--model", dec.model_path, "model file")->required();
  dec_cmd->add_option("--obs", dec.obs_path, "observation file")->required();
  dec_cmd->add_option("--algo", dec.algo, "vanilla|checkpoint|sieve-mp|static-bs|flash|flash-bs")
      ->capture_default_str();
  dec_cmd->add_option("--parallel", dec.parallel, "worker count P")
      ->check(CLI::PositiveNumber)->capture_default_str();
  auto* dec_beam = dec_cmd->add_option("--beam", dec.beam, "beam width B (default K)")
                       ->check(CLI::PositiveNumber);
  dec_cmd->add_option("--out", dec.out_path, "write the decoded path here, one state per line");
  dec_cmd->add_option("--format", dec.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  dec_cmd->add_flag("--verify", dec.verify, "also run vanilla Viterbi and report the gap");

  SweepFlags sw;
  auto* sw_cmd = app.add_subcommand("sweep", "run a parameter sweep and emit one row per run");
  add_instance_flags(sw_cmd, sw.instance);
  sw_cmd->add_option("--axis", sw.axis, "states|timesteps|edge-prob|beam|parallel")
      ->required()->check(CLI::IsMember(kAxes));
  sw_cmd->add_option("--values", sw.values, "comma-separated axis values")->delimiter(',');
  sw_cmd->add_option("--algo", sw.algos, "comma-separated algorithms")->delimiter(',')
      ->capture_default_str();
  sw_cmd->add_option("--parallel", sw.parallel, "worker count P")
      ->check(CLI::PositiveNumber)->capture_default_str();
  auto* sw_beam = sw_cmd->add_option("--beam", sw.beam, "beam width B (default K)")
                      ->check(CLI::PositiveNumber);
  sw_cmd->add_option("--reps", sw.reps, "instances per configuration")
      ->check(CLI::PositiveNumber)->capture_default_str();
  sw_cmd->add_option("--timing-runs", sw.timing_runs, "timed runs per row; the median is reported")
      ->check(CLI::PositiveNumber)->capture_default_str();
  sw_cmd->add_flag("--verify", sw.verify, "compute opt_score and eta against vanilla Viterbi");
  sw_cmd->add_option("--verify-cap", sw.verify_cap, "skip verification when K*T exceeds this")
      ->capture_default_str();
  sw_cmd->add_option("--out", sw.out_path, "output file (default stdout)");
  sw_cmd->add_option("--format", sw.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  VerifyFlags ver;
  auto* ver_cmd = app.add_subcommand("verify", "cross-check decoders against the oracles");
  add_instance_flags(ver_cmd, ver.instance);
  ver_cmd->add_option("--model", ver.model_path, "model file (default: generate)");
  ver_cmd->add_option("--obs", ver.obs_path, "observation file (default: generate)");
  ver_cmd->add_option("--algo", ver.algos, "comma-separated algorithms (default: all)")->delimiter(',');
  ver_cmd->add_option("--parallel", ver.parallel, "worker count P")
      ->check(CLI::PositiveNumber)->capture_default_str();
  auto* ver_beam = ver_cmd->add_option("--beam", ver.beam, "beam width B (default K)")
                       ->check(CLI::PositiveNumber);
  ver_cmd->add_option("--enumeration-cap", ver.enumeration_cap, "largest K^T for brute force")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFlagError;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (dec_cmd->parsed()) {
      dec.beam_set = dec_beam->count() > 0;
      return cmd_decode(dec, out, err);
    }
    if (sw_cmd->parsed()) {
      sw.beam_set = sw_beam->count() > 0;
      return cmd_sweep(sw, out);
    }
    ver.beam_set = ver_beam->count() > 0;
    return cmd_verify(ver, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFlagError;
  } catch (const EnumerationCapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitFlagError;
  } catch (const InfeasibleDecode& e) {
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const BeamExhausted& e) {
    err << "error: " << e.what() << '\n';
    return kExitBeamExhausted;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitMismatch;
  }
}

}  // namespace flashvit::cli
