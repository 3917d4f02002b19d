#include "polexp/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "polexp/error.hpp"

namespace polexp::cli {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, end);
  return std::string(16 - s.size(), '0') + s;
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string detail = e.what();
    if (auto pos = detail.find("syntax error"); pos != std::string::npos) detail = detail.substr(pos);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                      detail);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Reader::Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + ": expected an object");
}

std::string Reader::field(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

void Reader::fail(const std::string& key, const std::string& message) const {
  throw ConfigError(field(key) + ": " + message);
}

bool Reader::has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

bool Reader::explicit_null(const std::string& key) const {
  return j_.contains(key) && j_.at(key).is_null();
}

const json* Reader::find(const std::string& key) {
  used_.insert(key);
  auto it = j_.find(key);
  if (it == j_.end() || it->is_null()) return nullptr;
  return &*it;
}

double Reader::number(const std::string& key) {
  const json* v = find(key);
  if (!v) fail(key, "required number is missing");
  if (!v->is_number()) fail(key, "expected a number, got " + std::string(v->type_name()));
  const double x = v->get<double>();
  if (!std::isfinite(x)) fail(key, "must be finite");
  effective_[key] = x;
  return x;
}

double Reader::number(const std::string& key, double fallback) {
  if (!has(key)) {
    used_.insert(key);
    effective_[key] = fallback;
    return fallback;
  }
  return number(key);
}

std::int64_t Reader::integer(const std::string& key) {
  const json* v = find(key);
  if (!v) fail(key, "required integer is missing");
  if (!v->is_number_integer()) fail(key, "expected an integer, got " + v->dump());
  if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
    fail(key, "integer out of range");
  const auto x = v->get<std::int64_t>();
  effective_[key] = x;
  return x;
}

std::int64_t Reader::integer(const std::string& key, std::int64_t fallback) {
  if (!has(key)) {
    used_.insert(key);
    effective_[key] = fallback;
    return fallback;
  }
  return integer(key);
}

std::uint64_t Reader::u64(const std::string& key, std::uint64_t fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
    fail(key, "expected an unsigned 64-bit integer, got " + v->dump());
  const auto x = v->get<std::uint64_t>();
  effective_[key] = x;
  return x;
}

bool Reader::boolean(const std::string& key, bool fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_boolean()) fail(key, "expected true or false, got " + v->dump());
  effective_[key] = v->get<bool>();
  return v->get<bool>();
}

std::string Reader::string(const std::string& key, const std::string& fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_string()) fail(key, "expected a string, got " + v->dump());
  effective_[key] = v->get<std::string>();
  return v->get<std::string>();
}

std::string Reader::choice(const std::string& key, const std::vector<std::string>& options,
                           const std::string& fallback) {
  const std::string value = string(key, fallback);
  if (std::find(options.begin(), options.end(), value) == options.end()) {
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    fail(key, "unknown value \"" + value + "\" (expected one of: " + list + ")");
  }
  return value;
}

std::vector<double> Reader::numbers(const std::string& key, std::vector<double> fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const auto& e = (*v)[i];
    if (!e.is_number() || !std::isfinite(e.get<double>()))
      fail(key + "[" + std::to_string(i) + "]", "expected a finite number, got " + e.dump());
    out.push_back(e.get<double>());
  }
  effective_[key] = out;
  return out;
}

std::vector<int> Reader::integers(const std::string& key, std::vector<int> fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_array()) fail(key, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const auto& e = (*v)[i];
    if (!e.is_number_integer() || std::abs(e.get<std::int64_t>()) > 1'000'000'000)
      fail(key + "[" + std::to_string(i) + "]", "expected an integer, got " + e.dump());
    out.push_back(static_cast<int>(e.get<std::int64_t>()));
  }
  effective_[key] = out;
  return out;
}

std::vector<std::string> Reader::strings(const std::string& key,
                                         std::vector<std::string> fallback) {
  const json* v = find(key);
  if (!v) {
    effective_[key] = fallback;
    return fallback;
  }
  if (!v->is_array()) fail(key, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const auto& e = (*v)[i];
    if (!e.is_string()) fail(key + "[" + std::to_string(i) + "]", "expected a string, got " + e.dump());
    out.push_back(e.get<std::string>());
  }
  effective_[key] = out;
  return out;
}

std::optional<double> Reader::optional_number(const std::string& key,
                                              std::optional<double> fallback) {
  if (j_.contains(key) && j_.at(key).is_null()) {
    used_.insert(key);
    effective_[key] = nullptr;
    return std::nullopt;
  }
  if (!j_.contains(key)) {
    used_.insert(key);
    effective_[key] = fallback ? json(*fallback) : json(nullptr);
    return fallback;
  }
  return number(key);
}

std::optional<std::int64_t> Reader::optional_integer(const std::string& key) {
  if (!has(key)) {
    used_.insert(key);
    effective_[key] = nullptr;
    return std::nullopt;
  }
  return integer(key);
}

Reader Reader::object(const std::string& key, bool required) {
  static const json kEmpty = json::object();
  const json* v = find(key);
  if (!v) {
    if (required) fail(key, "required object is missing");
    return Reader(kEmpty, field(key));
  }
  if (!v->is_object()) fail(key, "expected an object, got " + std::string(v->type_name()));
  return Reader(*v, field(key));
}

void Reader::put(const std::string& key, json value) { effective_[key] = std::move(value); }

void Reader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : j_.items())
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + field(key);
  if (!unknown.empty()) throw ConfigError("unknown key(s): " + unknown);
}

namespace {

template <class F>
void checked(const std::string& where, F&& validate) {
  try {
    validate();
  } catch (const polexp::Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::size_t positive_size(Reader& r, const std::string& key, std::int64_t fallback,
                          std::int64_t min = 1) {
  const auto v = r.integer(key, fallback);
  if (v < min) r.fail(key, "must be >= " + std::to_string(min) + ", got " + std::to_string(v));
  return static_cast<std::size_t>(v);
}

struct EnvDefaults {
  std::optional<double> delta;
  std::optional<double> box;
  bool barrier = false;
};

EnvSpec parse_env(Reader& parent, const EnvDefaults& defaults) {
  Reader r = parent.object("env");
  EnvSpec env;
  env.dim = static_cast<int>(positive_size(r, "dim", 2));
  env.lipschitz_state = r.number("L_s", 1.0);
  env.lipschitz_action = r.number("L_a", 1.0);
  env.delta_cap = r.optional_number("delta", defaults.delta);
  env.box_halfwidth = r.optional_number("box_halfwidth", defaults.box);
  const bool null_barrier = r.explicit_null("barrier");
  const bool has_barrier = r.has("barrier") || (defaults.barrier && !null_barrier);
  if (has_barrier) {
    Reader b = r.object("barrier");
    HallwaySpec h;
    h.wall_x = b.number("wall_x", 2.0);
    const auto center = b.numbers("gap_center", std::vector<double>(env.dim - 1, 0.0));
    h.gap_center = Eigen::Map<const Vector>(center.data(), static_cast<Eigen::Index>(center.size()));
    h.gap_halfwidth = b.number("gap_halfwidth", 0.15);
    h.thickness = b.number("thickness", 0.05);
    b.finish();
    r.put("barrier", b.effective());
    env.barrier = h;
  } else {
    r.object("barrier");
    r.put("barrier", nullptr);
  }
  r.finish();
  checked(parent.field("env"), [&] { env.validate(); });
  parent.put("env", r.effective());
  return env;
}

PolicyPrior parse_prior(Reader& parent, const std::string& key, int dim, double sigma_w,
                        double sigma_b) {
  Reader r = parent.object(key);
  PolicyPrior prior;
  prior.arch.input_dim = dim;
  prior.arch.output_dim = dim;
  prior.arch.hidden = r.integers("hidden", {256, 256});
  prior.arch.activation =
      r.choice("activation", {"relu", "tanh"}, "relu") == "relu" ? Activation::relu : Activation::tanh;
  prior.init.kind = r.choice("init", {"gaussian", "xavier_glorot"}, "gaussian") == "gaussian"
                        ? InitKind::gaussian
                        : InitKind::xavier_glorot;
  prior.init.sigma_w = r.number("sigma_w", sigma_w);
  prior.init.sigma_b = r.number("sigma_b", sigma_b);
  r.finish();
  checked(parent.field(key), [&] {
    prior.arch.validate();
    prior.init.validate();
  });
  parent.put(key, r.effective());
  return prior;
}

std::pair<KernelSpec, DiffusionConvention> parse_kernel_spec(Reader& parent, double w2, double b2) {
  Reader r = parent.object("kernel");
  KernelSpec spec;
  spec.family = r.choice("family", {"relu_arccos", "rbf"}, "relu_arccos") == "rbf"
                    ? KernelFamily::rbf
                    : KernelFamily::relu_arccos;
  spec.sigma_w2 = r.number("sigma_w2", w2);
  spec.sigma_b2 = r.number("sigma_b2", b2);
  spec.rbf_lengthscale = r.number("rbf_lengthscale", 1.0);
  const auto conv = r.choice("convention", {"pi_scaled", "kernel_diagonal"}, "pi_scaled") == "pi_scaled"
                        ? DiffusionConvention::pi_scaled
                        : DiffusionConvention::kernel_diagonal;
  r.finish();
  checked(parent.field("kernel"), [&] { spec.validate(); });
  parent.put("kernel", r.effective());
  return {spec, conv};
}

ResetSchedule parse_schedule(Reader& parent, const std::string& key, ResetSchedule fallback) {
  Reader r = parent.object(key);
  ResetSchedule s;
  const std::string kind = r.choice("kind", {"constant", "linear"},
                                    fallback.kind == ResetSchedule::Kind::linear ? "linear" : "constant");
  s.kind = kind == "linear" ? ResetSchedule::Kind::linear : ResetSchedule::Kind::constant;
  s.p0 = r.number("p0", fallback.p0);
  s.p1 = r.number("p1", s.kind == ResetSchedule::Kind::linear ? fallback.p1 : s.p0);
  r.finish();
  checked(parent.field(key), [&] { s.validate(); });
  parent.put(key, r.effective());
  return s;
}

Vector parse_s0(Reader& r, int dim) {
  const auto v = r.numbers("s0", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  if (static_cast<int>(v.size()) != dim)
    r.fail("s0", "has " + std::to_string(v.size()) + " entries, env.dim is " + std::to_string(dim));
  return Eigen::Map<const Vector>(v.data(), dim);
}

RolloutKind parse_kind(const Reader& r, const std::string& key, const std::string& name) {
  if (name == "fixed") return RolloutKind::fixed;
  if (name == "per_step_resample") return RolloutKind::per_step_resample;
  if (name == "per_step_gp") return RolloutKind::per_step_gp;
  if (name == "hybrid") return RolloutKind::hybrid;
  if (name == "stochastic_reset") return RolloutKind::stochastic_reset;
  r.fail(key, "unknown mode \"" + name + "\"");
}

const std::vector<std::string> kModeNames{"fixed", "per_step_resample", "per_step_gp", "hybrid",
                                          "stochastic_reset"};

RunOptions parse_run(Reader& r, const Overrides& o) {
  RunOptions run;
  run.seed = r.u64("seed", 0);
  if (o.seed) {
    run.seed = *o.seed;
    r.put("seed", run.seed);
  }
  run.threads = static_cast<unsigned>(positive_size(r, "threads", 1));
  if (o.threads) run.threads = *o.threads;
  r.string("out", "");
  return run;
}

template <class T>
Parsed<T> finalize(Reader& r, const std::string& command, T config, RunOptions run) {
  r.finish();
  Parsed<T> out;
  out.config = std::move(config);
  out.run = run;
  out.effective = r.effective();
  // Neither the output location nor the worker count changes any result.
  out.effective.erase("out");
  out.effective.erase("threads");
  out.effective["command"] = command;
  out.hash = fnv1a(out.effective.dump());
  return out;
}

}  // namespace

Parsed<RolloutConfig> parse_rollout(const json& j, const Overrides& o) {
  Reader r(j, "");
  RolloutConfig c;
  const RunOptions run = parse_run(r, o);
  c.env = parse_env(r, {});
  c.s0 = parse_s0(r, c.env.dim);
  c.horizon = positive_size(r, "T", 100);
  c.n = positive_size(r, "N", 1);

  Reader m = r.object("mode");
  auto& mode = c.ensemble.mode;
  mode.kind = parse_kind(m, "kind", m.choice("kind", kModeNames, "fixed"));
  mode.n_switch = positive_size(m, "n_switch", 0, 0);
  if (mode.kind == RolloutKind::hybrid && mode.n_switch > c.horizon)
    m.fail("n_switch", "exceeds T = " + std::to_string(c.horizon));
  mode.schedule = parse_schedule(m, "schedule", {});
  m.finish();
  r.put("mode", m.effective());

  c.ensemble.fixed_prior = parse_prior(r, "policy", c.env.dim, 1.0, 0.1);
  c.ensemble.step_prior = parse_prior(r, "step_policy", c.env.dim, 0.05, 0.05);
  std::tie(c.ensemble.kernel, c.ensemble.convention) = parse_kernel_spec(r, 0.01, 0.01);

  Reader a = r.object("analysis");
  if (a.has("msd")) {
    Reader w = a.object("msd");
    const auto lo = positive_size(w, "t_lo", 1);
    const auto hi = positive_size(w, "t_hi", static_cast<std::int64_t>(c.horizon));
    if (hi <= lo || hi > c.horizon) w.fail("t_hi", "window must satisfy 1 <= t_lo < t_hi <= T");
    w.finish();
    a.put("msd", w.effective());
    c.msd_window = {lo, hi};
  } else {
    a.object("msd");
    a.put("msd", nullptr);
  }
  a.finish();
  r.put("analysis", a.effective());
  return finalize(r, "rollout", std::move(c), run);
}

Matrix parse_states(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(v))
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": not a number: \"" + tok + "\"");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " values, got " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(origin + ": no states");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return m;
}

Parsed<KernelConfig> parse_kernel(const json& j, const Overrides& o,
                                  const std::filesystem::path& base_dir) {
  Reader r(j, "");
  KernelConfig c;
  const RunOptions run = parse_run(r, o);
  std::tie(c.spec, std::ignore) = parse_kernel_spec(r, 1.0, 0.0);
  c.jitter = r.number("jitter", 0.0);
  if (c.jitter < 0.0) r.fail("jitter", "must be >= 0");
  const std::string file = r.string("states_file", "");
  if (file.empty()) r.fail("states_file", "required path is missing");
  std::filesystem::path path(file);
  if (path.is_relative()) path = base_dir / path;
  const std::string text = read_file(path);
  c.states = parse_states(text, path.string());
  // The hash covers the states themselves, not where they were read from.
  r.put("states_file", nullptr);
  r.put("states_fnv", hex64(fnv1a(text)));
  return finalize(r, "kernel", std::move(c), run);
}

Parsed<BoundCheckConfig> parse_bound_check(const json& j, const Overrides& o) {
  Reader r(j, "");
  BoundCheckConfig c;
  const RunOptions run = parse_run(r, o);
  c.env = parse_env(r, {0.05, std::nullopt, false});
  if (!c.env.delta_cap) r.fail("env.delta", "the bound check needs a displacement cap");
  c.s0 = parse_s0(r, c.env.dim);
  c.horizon = positive_size(r, "T", 200);
  c.n = positive_size(r, "N", 100);
  c.prior = parse_prior(r, "policy", c.env.dim, 1.0, 0.1);
  c.drift = r.choice("drift", {"first_action", "mean_action"}, "first_action") == "first_action"
                ? DriftMethod::first_action
                : DriftMethod::mean_action;
  return finalize(r, "bound-check", std::move(c), run);
}

Parsed<HallwayConfig> parse_hallway(const json& j, const Overrides& o) {
  Reader r(j, "");
  HallwayConfig c;
  const RunOptions run = parse_run(r, o);
  c.env = parse_env(r, {0.1, 6.0, true});
  if (!c.env.barrier) r.fail("env.barrier", "the hallway benchmark needs a barrier");
  if (!c.env.delta_cap) r.fail("env.delta", "the hallway benchmark needs a displacement cap");
  c.s0 = parse_s0(r, c.env.dim);
  if (!(c.s0(0) < c.env.barrier->wall_x)) r.fail("s0", "must start in front of the wall");
  c.horizon = positive_size(r, "T", 2000);
  c.n = positive_size(r, "N", 2000);
  c.fixed_prior = parse_prior(r, "policy", c.env.dim, 0.3, 1.0);
  c.step_prior = parse_prior(r, "step_policy", c.env.dim, 0.05, 0.002);
  if (const auto n_switch = r.optional_integer("n_switch")) {
    if (*n_switch < 0 || static_cast<std::size_t>(*n_switch) > c.horizon)
      r.fail("n_switch", "must lie in [0, T]");
    c.n_switch = static_cast<std::size_t>(*n_switch);
  }
  c.much_less = r.number("much_less", kMuchLessFactor);
  if (!(c.much_less > 0.0)) r.fail("much_less", "must be > 0");
  ResetSchedule ramp;
  ramp.kind = ResetSchedule::Kind::linear;
  ramp.p0 = 0.0;
  ramp.p1 = 0.05;
  c.schedule = parse_schedule(r, "reset_schedule", ramp);
  const auto mode_names =
      r.strings("modes", {"fixed", "per_step_resample", "hybrid", "stochastic_reset"});
  if (mode_names.empty()) r.fail("modes", "needs at least one mode");
  for (const auto& name : mode_names) {
    const auto kind = parse_kind(r, "modes", name);
    if (kind == RolloutKind::per_step_gp) r.fail("modes", "per_step_gp is not a hallway mode");
    c.modes.push_back(kind);
  }
  const double default_target = c.env.barrier->wall_x + c.env.barrier->thickness;
  c.target_x = r.number("target_x", default_target);
  if (c.target_x < c.env.barrier->wall_x) r.fail("target_x", "lies in front of the wall");
  c.samples = positive_size(r, "sample_trajectories", 3, 0);
  return finalize(r, "hallway", std::move(c), run);
}

Parsed<SteadyStateConfig> parse_steady_state(const json& j, const Overrides& o) {
  Reader r(j, "");
  SteadyStateConfig c;
  const RunOptions run = parse_run(r, o);
  c.dim = static_cast<int>(positive_size(r, "dim", 2));
  std::tie(c.kernel, c.convention) = parse_kernel_spec(r, 0.01, 0.01);
  if (c.kernel.family != KernelFamily::relu_arccos)
    r.fail("kernel.family", "steady-state compares against the relu_arccos diffusion");
  if (!(c.kernel.sigma_w2 > 0.0) || !(c.kernel.sigma_b2 > 0.0))
    r.fail("kernel", "sigma_w2 and sigma_b2 must both be > 0");
  c.horizon = positive_size(r, "T", 5000);
  c.n = positive_size(r, "N", 4000);
  auto optional_positive = [](Reader& rr, const std::string& key) {
    const auto v = rr.optional_number(key, std::nullopt);
    if (v && !(*v > 0.0)) rr.fail(key, "must be > 0");
    return v;
  };
  Reader h = r.object("histogram");
  c.bins = positive_size(h, "bins", 40, 5);
  c.r_min = optional_positive(h, "r_min");
  c.r_max = optional_positive(h, "r_max");
  h.finish();
  r.put("histogram", h.effective());
  Reader f = r.object("fit");
  c.fit_lo = optional_positive(f, "r_lo");
  c.fit_hi = optional_positive(f, "r_hi");
  f.finish();
  r.put("fit", f.effective());
  Reader fp = r.object("fp");
  c.fp_radius = optional_positive(fp, "radius");
  c.fp_cells = static_cast<int>(positive_size(fp, "n_cells", 128, 32));
  fp.finish();
  r.put("fp", fp.effective());
  return finalize(r, "steady-state", std::move(c), run);
}

}  // namespace polexp::cli
