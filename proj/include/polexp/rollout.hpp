#pragma once

// Trajectory generation under fixed, per-step resampled, GP-idealized, hybrid
// and stochastically reset policies.
//
// Seed layout. A trajectory with seed S uses
//   split_seed(S, t)              the policy drawn at step t (resample, GP, reset, hybrid tail)
//   split_seed(S, kFixedNetKey)   its fixed network inside an ensemble
//   split_seed(S, kResetKey)      the Bernoulli stream deciding resets
// and trajectory i of an ensemble has S = split_seed(master, i). Because the
// step seeds do not depend on the mode, the boundary cases of hybrid and
// stochastic reset reproduce the pure modes bit for bit.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "polexp/env.hpp"
#include "polexp/nngp.hpp"
#include "polexp/policy.hpp"

namespace polexp {

inline constexpr std::uint64_t kFixedNetKey = 0xF17ED'0000'0000ULL;
inline constexpr std::uint64_t kResetKey = 0x2E5E7'0000'0000ULL;

enum class RolloutKind { fixed, per_step_resample, per_step_gp, hybrid, stochastic_reset };

/// Reset probability as a function of the step: constant p0, or a linear ramp
/// p0 -> p1 over steps 0 .. T-1.
struct ResetSchedule {
  enum class Kind { constant, linear } kind = Kind::constant;
  double p0 = 0.0;
  double p1 = 0.0;

  double at(std::size_t t, std::size_t horizon) const;
  void validate() const;
};

struct RolloutMode {
  RolloutKind kind = RolloutKind::fixed;
  std::size_t n_switch = 0;  // hybrid only
  ResetSchedule schedule;    // stochastic_reset only
};

struct Trajectory {
  Matrix states;   // dim x (T + 1)
  Matrix actions;  // dim x T
  RolloutMode mode;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> policy_seeds;  // seeds of freshly drawn policies, in order

  std::size_t horizon() const noexcept { return static_cast<std::size_t>(actions.cols()); }
};

Trajectory rollout_fixed(const PolicyNet& net, const EnvSpec& env, const VectorRef& s0,
                         std::size_t horizon);

Trajectory rollout_resample(const Architecture& arch, const InitScheme& init, const EnvSpec& env,
                            const VectorRef& s0, std::size_t horizon, std::uint64_t seed);

/// Actions drawn from N(0, Sigma(s_t) I), the single-state marginal of the GP
/// policy. A fresh policy per step never sees two states, so marginals suffice.
Trajectory rollout_gp(const KernelSpec& spec, DiffusionConvention convention, const EnvSpec& env,
                      const VectorRef& s0, std::size_t horizon, std::uint64_t seed);

/// `net` for steps [0, n_switch), a fresh policy per step afterwards.
Trajectory rollout_hybrid(const PolicyNet& net, const Architecture& arch, const InitScheme& init,
                          const EnvSpec& env, const VectorRef& s0, std::size_t horizon,
                          std::size_t n_switch, std::uint64_t seed);

/// Before step t the current network is replaced by a fresh draw with
/// probability schedule.at(t); otherwise it is kept.
Trajectory rollout_stochastic_reset(const PolicyNet& net0, const Architecture& arch,
                                    const InitScheme& init, const EnvSpec& env,
                                    const VectorRef& s0, std::size_t horizon,
                                    const ResetSchedule& schedule, std::uint64_t seed);

/// Network prior: the architecture and the initialization it is drawn from.
struct PolicyPrior {
  Architecture arch;
  InitScheme init;
};

struct EnsembleConfig {
  RolloutMode mode;
  PolicyPrior fixed_prior;  // the per-trajectory fixed network (fixed, hybrid, reset)
  PolicyPrior step_prior;   // per-step draws (resample, hybrid, reset)
  KernelSpec kernel;        // per_step_gp
  DiffusionConvention convention = DiffusionConvention::pi_scaled;
};

struct Ensemble {
  std::vector<Trajectory> trajectories;
  EnvSpec env;
  std::uint64_t config_hash = 0;
};

/// Trajectory `index` of an ensemble; depends only on split_seed(master_seed, index).
Trajectory rollout_member(const EnsembleConfig& config, const EnvSpec& env, const VectorRef& s0,
                          std::size_t horizon, std::uint64_t master_seed, std::size_t index);

/// N members, computed on `threads` workers. The result is independent of the
/// thread count and of the order in which members are produced.
Ensemble run_ensemble(const EnsembleConfig& config, const EnvSpec& env, const VectorRef& s0,
                      std::size_t horizon, std::size_t n, std::uint64_t master_seed,
                      unsigned threads = 1);

/// Runs `fn(i)` for i in [0, n) on `threads` workers with a static partition.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

const char* to_string(RolloutKind k);

}  // namespace polexp
