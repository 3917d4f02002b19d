#pragma once

// Strict JSON experiment configs for the command-line runner.
//
// Every object is read through a Reader that records which keys were used;
// leftover keys are rejected with their full path. Defaults are written back
// into the effective config, whose canonical dump is what the config hash
// covers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polexp/analysis.hpp"
#include "polexp/env.hpp"
#include "polexp/rollout.hpp"

namespace polexp::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid or unreadable configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

std::string hex64(std::uint64_t v);

/// Parses a JSON document; syntax errors become ConfigError with line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

std::string read_file(const std::filesystem::path& path);

/// Typed access to one JSON object. Records used keys and fills `effective`.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path);

  bool has(const std::string& key) const;
  bool explicit_null(const std::string& key) const;
  double number(const std::string& key, double fallback);
  double number(const std::string& key);
  std::int64_t integer(const std::string& key, std::int64_t fallback);
  std::int64_t integer(const std::string& key);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, const std::string& fallback);
  std::string choice(const std::string& key, const std::vector<std::string>& options,
                     const std::string& fallback);
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback);
  std::vector<int> integers(const std::string& key, std::vector<int> fallback);
  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback);
  /// Absent: fallback. Explicit null: nullopt, which switches a default off.
  std::optional<double> optional_number(const std::string& key, std::optional<double> fallback);
  std::optional<std::int64_t> optional_integer(const std::string& key);
  /// Sub-object (empty object when missing and `required` is false).
  Reader object(const std::string& key, bool required = false);
  /// Stores a nested effective object produced by a sub-reader.
  void put(const std::string& key, nlohmann::json value);
  /// Throws ConfigError naming every unknown key.
  void finish() const;

  const nlohmann::json& effective() const { return effective_; }
  std::string field(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  const nlohmann::json* find(const std::string& key);

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
  nlohmann::json effective_ = nlohmann::json::object();
};

/// Fields shared by every subcommand.
struct RunOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RolloutConfig {
  EnvSpec env;
  Vector s0;
  std::size_t horizon = 100;
  std::size_t n = 1;
  EnsembleConfig ensemble;
  std::optional<std::pair<std::size_t, std::size_t>> msd_window;
};

struct KernelConfig {
  KernelSpec spec;
  Matrix states;
  double jitter = 0.0;
};

struct BoundCheckConfig {
  EnvSpec env;
  Vector s0;
  std::size_t horizon = 200;
  std::size_t n = 100;
  PolicyPrior prior;
  DriftMethod drift = DriftMethod::first_action;
};

struct HallwayConfig {
  EnvSpec env;
  Vector s0;
  std::size_t horizon = 2000;
  std::size_t n = 2000;
  PolicyPrior fixed_prior;
  PolicyPrior step_prior;
  std::optional<std::size_t> n_switch;  // default: switch_step_heuristic n_min
  double much_less = kMuchLessFactor;
  ResetSchedule schedule;
  std::vector<RolloutKind> modes;
  double target_x = 0.0;
  std::size_t samples = 3;
};

struct SteadyStateConfig {
  int dim = 2;
  KernelSpec kernel;
  DiffusionConvention convention = DiffusionConvention::pi_scaled;
  std::size_t horizon = 5000;
  std::size_t n = 4000;
  std::size_t bins = 40;
  std::optional<double> r_min;
  std::optional<double> r_max;
  std::optional<double> fit_lo;
  std::optional<double> fit_hi;
  std::optional<double> fp_radius;
  int fp_cells = 128;
};

/// A parsed config: the typed payload, the effective JSON and its hash.
template <class T>
struct Parsed {
  T config;
  RunOptions run;
  nlohmann::json effective;
  std::uint64_t hash = 0;
};

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

Parsed<RolloutConfig> parse_rollout(const nlohmann::json& j, const Overrides& o);
/// `base_dir` resolves a relative states_file.
Parsed<KernelConfig> parse_kernel(const nlohmann::json& j, const Overrides& o,
                                  const std::filesystem::path& base_dir);
Parsed<BoundCheckConfig> parse_bound_check(const nlohmann::json& j, const Overrides& o);
Parsed<HallwayConfig> parse_hallway(const nlohmann::json& j, const Overrides& o);
Parsed<SteadyStateConfig> parse_steady_state(const nlohmann::json& j, const Overrides& o);

/// Reads a states file: one state per line, comma or whitespace separated,
/// '#' starts a comment. Throws ConfigError on ragged or non-numeric rows.
Matrix parse_states(const std::string& text, const std::string& origin);

}  // namespace polexp::cli
