#include "polexp/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "polexp/error.hpp"
#include "polexp/rng.hpp"

namespace polexp {
namespace {

Trajectory start(const EnvSpec& env, const VectorRef& s0, std::size_t horizon, RolloutMode mode,
                 std::uint64_t seed) {
  env.validate();
  if (s0.size() != env.dim)
    throw DimensionError("rollout: s0 has dimension " + std::to_string(s0.size()) +
                         ", env expects " + std::to_string(env.dim));
  if (horizon == 0) throw InvalidArgument("rollout: horizon must be positive");
  Trajectory traj;
  const auto cols = static_cast<Eigen::Index>(horizon);
  traj.states.resize(env.dim, cols + 1);
  traj.actions.resize(env.dim, cols);
  traj.states.col(0) = s0;
  traj.mode = mode;
  traj.seed = seed;
  return traj;
}

void check_policy_dims(const Architecture& arch, const EnvSpec& env) {
  if (arch.input_dim != env.dim || arch.output_dim != env.dim)
    throw DimensionError("rollout: policy maps R^" + std::to_string(arch.input_dim) + " -> R^" +
                         std::to_string(arch.output_dim) + ", env has dim " +
                         std::to_string(env.dim));
}

// Runs `net` over steps [from, to). A deterministic map revisiting s_{t-1} or
// s_t is periodic from there on, so the rest is copied instead of recomputed.
void run_fixed_segment(const PolicyNet& net, const EnvSpec& env, Trajectory& traj,
                       std::size_t from, std::size_t to) {
  for (std::size_t t = from; t < to; ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    const Vector a = net(traj.states.col(c));
    traj.actions.col(c) = a;
    traj.states.col(c + 1) = step(env, traj.states.col(c), a);
    const bool period1 = traj.states.col(c + 1) == traj.states.col(c);
    const bool period2 = t > from && traj.states.col(c + 1) == traj.states.col(c - 1);
    if (period1 || period2) {
      const Eigen::Index period = period1 ? 1 : 2;
      for (auto u = c + 1; u < static_cast<Eigen::Index>(to); ++u) {
        traj.actions.col(u) = traj.actions.col(u - period);
        traj.states.col(u + 1) = traj.states.col(u + 1 - period);
      }
      return;
    }
  }
}

void resample_step(const Architecture& arch, const InitScheme& init, const EnvSpec& env,
                   Trajectory& traj, std::size_t t) {
  const auto c = static_cast<Eigen::Index>(t);
  const std::uint64_t policy_seed = split_seed(traj.seed, t);
  const Vector a = sample_forward(arch, init, traj.states.col(c), policy_seed);
  traj.policy_seeds.push_back(policy_seed);
  traj.actions.col(c) = a;
  traj.states.col(c + 1) = step(env, traj.states.col(c), a);
}

}  // namespace

double ResetSchedule::at(std::size_t t, std::size_t horizon) const {
  if (kind == Kind::constant || horizon <= 1) return p0;
  const double frac = static_cast<double>(t) / static_cast<double>(horizon - 1);
  return p0 + (p1 - p0) * frac;
}

void ResetSchedule::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(p0) || (kind == Kind::linear && !in_unit(p1)))
    throw InvalidArgument("reset schedule: probabilities must lie in [0, 1]");
}

Trajectory rollout_fixed(const PolicyNet& net, const EnvSpec& env, const VectorRef& s0,
                         std::size_t horizon) {
  check_policy_dims(net.arch(), env);
  auto traj = start(env, s0, horizon, RolloutMode{RolloutKind::fixed, 0, {}}, net.seed());
  run_fixed_segment(net, env, traj, 0, horizon);
  return traj;
}

Trajectory rollout_resample(const Architecture& arch, const InitScheme& init, const EnvSpec& env,
                            const VectorRef& s0, std::size_t horizon, std::uint64_t seed) {
  arch.validate();
  init.validate();
  check_policy_dims(arch, env);
  auto traj = start(env, s0, horizon, RolloutMode{RolloutKind::per_step_resample, 0, {}}, seed);
  traj.policy_seeds.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) resample_step(arch, init, env, traj, t);
  return traj;
}

Trajectory rollout_gp(const KernelSpec& spec, DiffusionConvention convention, const EnvSpec& env,
                      const VectorRef& s0, std::size_t horizon, std::uint64_t seed) {
  spec.validate();
  auto traj = start(env, s0, horizon, RolloutMode{RolloutKind::per_step_gp, 0, {}}, seed);
  traj.policy_seeds.reserve(horizon);
  Vector a(env.dim);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    const std::uint64_t policy_seed = split_seed(seed, t);
    Rng rng(policy_seed);
    const double scale = std::sqrt(diffusion_coefficient(spec, convention, traj.states.col(c)));
    for (auto& ai : a) ai = scale * rng.normal();
    traj.policy_seeds.push_back(policy_seed);
    traj.actions.col(c) = a;
    traj.states.col(c + 1) = step(env, traj.states.col(c), a);
  }
  return traj;
}

Trajectory rollout_hybrid(const PolicyNet& net, const Architecture& arch, const InitScheme& init,
                          const EnvSpec& env, const VectorRef& s0, std::size_t horizon,
                          std::size_t n_switch, std::uint64_t seed) {
  if (n_switch > horizon) throw InvalidArgument("rollout_hybrid: n_switch exceeds horizon");
  arch.validate();
  init.validate();
  check_policy_dims(arch, env);
  check_policy_dims(net.arch(), env);
  auto traj = start(env, s0, horizon, RolloutMode{RolloutKind::hybrid, n_switch, {}}, seed);
  run_fixed_segment(net, env, traj, 0, n_switch);
  for (std::size_t t = n_switch; t < horizon; ++t) resample_step(arch, init, env, traj, t);
  return traj;
}

Trajectory rollout_stochastic_reset(const PolicyNet& net0, const Architecture& arch,
                                    const InitScheme& init, const EnvSpec& env,
                                    const VectorRef& s0, std::size_t horizon,
                                    const ResetSchedule& schedule, std::uint64_t seed) {
  schedule.validate();
  arch.validate();
  init.validate();
  check_policy_dims(arch, env);
  check_policy_dims(net0.arch(), env);
  RolloutMode mode{RolloutKind::stochastic_reset, 0, {}};
  mode.schedule = schedule;
  auto traj = start(env, s0, horizon, mode, seed);

  // All decisions up front: a network that lives for one step only is
  // evaluated with sample_forward, exactly as in rollout_resample.
  std::vector<char> reset(horizon);
  Rng coin(split_seed(seed, kResetKey));
  for (std::size_t t = 0; t < horizon; ++t) reset[t] = coin.uniform() < schedule.at(t, horizon);

  std::optional<PolicyNet> drawn;
  const PolicyNet* current = &net0;
  std::size_t t = 0;
  while (t < horizon) {
    if (!reset[t]) {
      // Keep the current network until the next reset.
      std::size_t end = t + 1;
      while (end < horizon && !reset[end]) ++end;
      run_fixed_segment(*current, env, traj, t, end);
      t = end;
      continue;
    }
    const std::uint64_t policy_seed = split_seed(seed, t);
    const bool single_use = t + 1 == horizon || reset[t + 1];
    if (single_use) {
      resample_step(arch, init, env, traj, t);
      ++t;
      continue;
    }
    drawn.emplace(sample_policy(arch, init, policy_seed));
    current = &*drawn;
    traj.policy_seeds.push_back(policy_seed);
    std::size_t end = t + 1;
    while (end < horizon && !reset[end]) ++end;
    run_fixed_segment(*current, env, traj, t, end);
    t = end;
  }
  return traj;
}

Trajectory rollout_member(const EnsembleConfig& config, const EnvSpec& env, const VectorRef& s0,
                          std::size_t horizon, std::uint64_t master_seed, std::size_t index) {
  const std::uint64_t seed = split_seed(master_seed, index);
  auto fixed_net = [&] {
    return sample_policy(config.fixed_prior.arch, config.fixed_prior.init,
                         split_seed(seed, kFixedNetKey));
  };
  const auto& step_prior = config.step_prior;
  switch (config.mode.kind) {
    case RolloutKind::fixed: {
      auto traj = rollout_fixed(fixed_net(), env, s0, horizon);
      traj.seed = seed;
      return traj;
    }
    case RolloutKind::per_step_resample:
      return rollout_resample(step_prior.arch, step_prior.init, env, s0, horizon, seed);
    case RolloutKind::per_step_gp:
      return rollout_gp(config.kernel, config.convention, env, s0, horizon, seed);
    case RolloutKind::hybrid:
      return rollout_hybrid(fixed_net(), step_prior.arch, step_prior.init, env, s0, horizon,
                            config.mode.n_switch, seed);
    case RolloutKind::stochastic_reset:
      return rollout_stochastic_reset(fixed_net(), step_prior.arch, step_prior.init, env, s0,
                                      horizon, config.mode.schedule, seed);
  }
  throw InvalidArgument("rollout_member: unknown mode");
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

Ensemble run_ensemble(const EnsembleConfig& config, const EnvSpec& env, const VectorRef& s0,
                      std::size_t horizon, std::size_t n, std::uint64_t master_seed,
                      unsigned threads) {
  if (n == 0) throw InvalidArgument("run_ensemble: N must be >= 1");
  if (config.mode.kind == RolloutKind::hybrid && config.mode.n_switch > horizon)
    throw InvalidArgument("run_ensemble: n_switch exceeds horizon");
  Ensemble ens;
  ens.env = env;
  ens.trajectories.resize(n);
  const Vector start_state = s0;
  parallel_for(n, threads, [&](std::size_t i) {
    ens.trajectories[i] = rollout_member(config, env, start_state, horizon, master_seed, i);
  });
  return ens;
}

const char* to_string(RolloutKind k) {
  switch (k) {
    case RolloutKind::fixed: return "fixed";
    case RolloutKind::per_step_resample: return "per_step_resample";
    case RolloutKind::per_step_gp: return "per_step_gp";
    case RolloutKind::hybrid: return "hybrid";
    case RolloutKind::stochastic_reset: return "stochastic_reset";
  }
  return "unknown";
}

}  // namespace polexp
