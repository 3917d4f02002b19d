#pragma once

// The five subcommands as pure functions from a parsed config to output files.

#include "polexp/cli/config.hpp"
#include "polexp/cli/output.hpp"

namespace polexp::cli {

/// trajectories.csv, msd.csv, rollout.json
RunResult run_rollout(const Parsed<RolloutConfig>& p);
/// kernel.csv, states.csv, gp_sample.csv, kernel.json
RunResult run_kernel(const Parsed<KernelConfig>& p);
/// bound_check.csv, bound_check.json
RunResult run_bound_check(const Parsed<BoundCheckConfig>& p);
/// passage.csv, samples.csv, hallway.json
RunResult run_hallway(const Parsed<HallwayConfig>& p);
/// densities.csv, steady_state.json
RunResult run_steady_state(const Parsed<SteadyStateConfig>& p);

/// sqrt(sigma_b2 / (kappa sigma_w2)): where Sigma's two terms are equal.
double crossover_radius(const KernelSpec& spec, DiffusionConvention convention);

}  // namespace polexp::cli
