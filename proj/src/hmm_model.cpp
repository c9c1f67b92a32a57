// SPDX-License-Identifier: Apache-2.0
#include "flashvit/hmm_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "flashvit/errors.hpp"

namespace flashvit {

namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

// Open interval (0, 1) from the top 53 bits, independent of the standard
// library's distribution implementation.
double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

void check_distribution(std::span<const double> row, const std::string& field,
                        bool allow_all_absent) {
  bool any_finite = false;
  for (double v : row) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw FormatError(field + ": entries must be finite log-probabilities or -inf");
    }
    if (v > kNormalizationTolerance) throw FormatError(field + ": log-probability above 0");
    any_finite |= std::isfinite(v);
  }
  if (!any_finite) {
    if (allow_all_absent) return;
    throw FormatError(field + ": distribution has no support");
  }
  const double lse = logsumexp(row);
  if (std::abs(lse) > kNormalizationTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << field << ": not normalized (logsumexp = " << lse << ")";
    throw FormatError(msg.str());
  }
}

struct TransitionDraw {
  std::vector<double> weights;  // K x K, zero where no edge
  std::size_t sampled_edges = 0;
};

TransitionDraw draw_transitions(const GeneratorConfig& config, std::mt19937_64& rng) {
  const std::size_t k = config.num_states;
  TransitionDraw draw;
  draw.weights.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    bool has_edge = false;
    for (std::size_t j = 0; j < k; ++j) {
      const double coin = uniform_open(rng);
      const double weight = uniform_open(rng);
      if (coin < config.edge_prob) {
        draw.weights[i * k + j] = weight;
        has_edge = true;
        ++draw.sampled_edges;
      }
    }
    if (!has_edge) draw.weights[i * k + i] = uniform_open(rng);
  }
  return draw;
}

void normalize_to_log(std::span<double> row) {
  double sum = 0.0;
  for (double w : row) sum += w;
  for (double& w : row) w = w > 0.0 ? std::log(w / sum) : kNegInf;
}

json encode_log(double v) {
  if (v == kNegInf) return "-inf";
  return v;
}

double decode_log(const json& j, const std::string& field) {
  if (j.is_string()) {
    if (j.get<std::string>() == "-inf") return kNegInf;
    throw FormatError(field + ": unexpected string value '" + j.get<std::string>() + "'");
  }
  if (!j.is_number()) throw FormatError(field + ": expected number or \"-inf\"");
  return j.get<double>();
}

std::vector<double> decode_vector(const json& j, std::size_t expected, const std::string& field) {
  if (!j.is_array()) throw FormatError(field + ": expected array");
  if (j.size() != expected) {
    throw FormatError(field + ": expected " + std::to_string(expected) + " entries, got " +
                      std::to_string(j.size()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(decode_log(j[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<double> decode_matrix(const json& j, std::size_t rows, std::size_t cols,
                                  const std::string& field) {
  if (!j.is_array() || j.size() != rows) {
    throw FormatError(field + ": expected array of " + std::to_string(rows) + " rows");
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = decode_vector(j[r], cols, field + "[" + std::to_string(r) + "]");
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::size_t read_count(const json& doc, const char* field) {
  if (!doc.contains(field)) throw FormatError(std::string(field) + ": missing");
  const json& v = doc[field];
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw FormatError(std::string(field) + ": must be an integer >= 1");
  }
  return v.get<std::size_t>();
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

double logsumexp(std::span<const double> values) {
  double peak = kNegInf;
  for (double v : values) peak = std::max(peak, v);
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

HmmModel::HmmModel(std::size_t num_states, std::size_t num_symbols,
                   std::vector<double> log_initial, std::vector<double> log_transition,
                   std::vector<double> log_emission)
    : num_states_(num_states),
      num_symbols_(num_symbols),
      log_initial_(std::move(log_initial)),
      log_transition_(std::move(log_transition)),
      log_emission_(std::move(log_emission)) {
  if (num_states_ < 1) throw FormatError("num_states: must be >= 1");
  if (num_symbols_ < 1) throw FormatError("num_symbols: must be >= 1");
  if (num_states_ > static_cast<std::size_t>(std::numeric_limits<StateIndex>::max())) {
    throw FormatError("num_states: too large");
  }
  if (log_initial_.size() != num_states_) throw FormatError("log_initial: wrong length");
  if (log_transition_.size() != num_states_ * num_states_) {
    throw FormatError("log_transition: wrong shape");
  }
  if (log_emission_.size() != num_states_ * num_symbols_) {
    throw FormatError("log_emission: wrong shape");
  }

  check_distribution(log_initial_, "log_initial", false);
  for (std::size_t i = 0; i < num_states_; ++i) {
    check_distribution({log_transition_.data() + i * num_states_, num_states_},
                       "log_transition[" + std::to_string(i) + "]", true);
    check_distribution({log_emission_.data() + i * num_symbols_, num_symbols_},
                       "log_emission[" + std::to_string(i) + "]", false);
  }

  emission_by_symbol_.resize(num_symbols_ * num_states_);
  for (std::size_t i = 0; i < num_states_; ++i) {
    for (std::size_t o = 0; o < num_symbols_; ++o) {
      emission_by_symbol_[o * num_states_ + i] = log_emission_[i * num_symbols_ + o];
    }
  }
}

HmmModel HmmModel::from_probabilities(std::size_t num_states, std::size_t num_symbols,
                                      std::span<const double> initial,
                                      std::span<const double> transition,
                                      std::span<const double> emission) {
  auto to_log = [](std::span<const double> p) {
    std::vector<double> out(p.size());
    std::transform(p.begin(), p.end(), out.begin(),
                   [](double x) { return x > 0.0 ? std::log(x) : kNegInf; });
    return out;
  };
  return HmmModel(num_states, num_symbols, to_log(initial), to_log(transition),
                  to_log(emission));
}

bool HmmModel::operator==(const HmmModel& other) const {
  return num_states_ == other.num_states_ && num_symbols_ == other.num_symbols_ &&
         log_initial_ == other.log_initial_ && log_transition_ == other.log_transition_ &&
         log_emission_ == other.log_emission_;
}

ObservationSequence::ObservationSequence(std::vector<Symbol> symbols)
    : symbols_(std::move(symbols)) {}

void ObservationSequence::validate_against(const HmmModel& model) const {
  if (symbols_.empty()) throw FormatError("symbols: sequence must be non-empty");
  for (std::size_t t = 0; t < symbols_.size(); ++t) {
    if (symbols_[t] < 0 || static_cast<std::size_t>(symbols_[t]) >= model.num_symbols()) {
      throw FormatError("symbols[" + std::to_string(t) + "]: outside [0, num_symbols)");
    }
  }
}

void GeneratorConfig::validate() const {
  if (num_states < 1) throw ConfigError("num_states must be >= 1");
  if (num_symbols < 1) throw ConfigError("num_symbols must be >= 1");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw ConfigError("edge_prob must lie in (0, 1]");
  }
}

HmmModel generate_er_hmm(const GeneratorConfig& config) {
  config.validate();
  const std::size_t k = config.num_states;
  const std::size_t m = config.num_symbols;
  std::mt19937_64 rng(config.seed);

  auto draw = draw_transitions(config, rng);
  for (std::size_t i = 0; i < k; ++i) normalize_to_log({draw.weights.data() + i * k, k});

  std::vector<double> initial(k);
  for (double& w : initial) w = uniform_open(rng);
  normalize_to_log(initial);

  std::vector<double> emission(k * m);
  for (double& w : emission) w = uniform_open(rng);
  for (std::size_t i = 0; i < k; ++i) normalize_to_log({emission.data() + i * m, m});

  return HmmModel(k, m, std::move(initial), std::move(draw.weights), std::move(emission));
}

std::size_t count_sampled_edges(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  return draw_transitions(config, rng).sampled_edges;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ObservationSequence sample_observations(const HmmModel& model, std::size_t length,
                                        std::uint64_t seed) {
  if (length < 1) throw ConfigError("observation length must be >= 1");
  std::mt19937_64 rng(seed);

  // Inverse-CDF draw; falls back to the last supported index on rounding.
  auto draw = [&rng](std::span<const double> log_probs) {
    const double u = uniform_open(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < log_probs.size(); ++i) {
      if (log_probs[i] == kNegInf) continue;
      acc += std::exp(log_probs[i]);
      last = i;
      if (u < acc) return i;
    }
    return last;
  };

  const std::size_t m = model.num_symbols();
  std::vector<Symbol> symbols(length);
  auto state = static_cast<StateIndex>(draw(model.log_initial()));
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      auto row = model.transition_row(state);
      // Dead-end state: the chain cannot continue, so it stays put.
      if (std::any_of(row.begin(), row.end(), [](double v) { return v != kNegInf; })) {
        state = static_cast<StateIndex>(draw(row));
      }
    }
    symbols[t] = static_cast<Symbol>(
        draw({model.log_emission().data() + static_cast<std::size_t>(state) * m, m}));
  }
  return ObservationSequence(std::move(symbols));
}

void save_model(const HmmModel& model, const std::filesystem::path& path) {
  const std::size_t k = model.num_states();
  const std::size_t m = model.num_symbols();
  json doc;
  doc["version"] = kModelFormatVersion;
  doc["num_states"] = k;
  doc["num_symbols"] = m;

  json initial = json::array();
  for (double v : model.log_initial()) initial.push_back(encode_log(v));
  doc["log_initial"] = std::move(initial);

  json transition = json::array();
  json emission = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    json row = json::array();
    for (double v : model.transition_row(static_cast<StateIndex>(i))) row.push_back(encode_log(v));
    transition.push_back(std::move(row));
    json erow = json::array();
    for (std::size_t o = 0; o < m; ++o) {
      erow.push_back(encode_log(model.emission(static_cast<StateIndex>(i), static_cast<Symbol>(o))));
    }
    emission.push_back(std::move(erow));
  }
  doc["log_transition"] = std::move(transition);
  doc["log_emission"] = std::move(emission);
  write_json(doc, path);
}

HmmModel load_model(const std::filesystem::path& path) {
  const json doc = read_json(path);
  if (!doc.is_object()) throw FormatError("model: top level must be an object");
  if (!doc.contains("version") || doc["version"] != kModelFormatVersion) {
    throw FormatError("version: expected 1");
  }
  const std::size_t k = read_count(doc, "num_states");
  const std::size_t m = read_count(doc, "num_symbols");
  for (const char* field : {"log_initial", "log_transition", "log_emission"}) {
    if (!doc.contains(field)) throw FormatError(std::string(field) + ": missing");
  }
  return HmmModel(k, m, decode_vector(doc["log_initial"], k, "log_initial"),
                  decode_matrix(doc["log_transition"], k, k, "log_transition"),
                  decode_matrix(doc["log_emission"], k, m, "log_emission"));
}

void save_observations(const ObservationSequence& obs, const std::filesystem::path& path) {
  json doc;
  doc["symbols"] = std::vector<Symbol>(obs.symbols().begin(), obs.symbols().end());
  write_json(doc, path);
}

ObservationSequence load_observations(const std::filesystem::path& path) {
  const json doc = read_json(path);
  if (!doc.is_object() || !doc.contains("symbols") || !doc["symbols"].is_array()) {
    throw FormatError("symbols: missing or not an array");
  }
  std::vector<Symbol> symbols;
  symbols.reserve(doc["symbols"].size());
  for (std::size_t t = 0; t < doc["symbols"].size(); ++t) {
    const json& v = doc["symbols"][t];
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw FormatError("symbols[" + std::to_string(t) + "]: expected non-negative integer");
    }
    symbols.push_back(v.get<Symbol>());
  }
  if (symbols.empty()) throw FormatError("symbols: sequence must be non-empty");
  return ObservationSequence(std::move(symbols));
}

}  // namespace flashvit
