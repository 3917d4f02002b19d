#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polexp/analysis.hpp"
#include "polexp/error.hpp"
#include "polexp/rng.hpp"
#include "polexp/rollout.hpp"

using namespace polexp;

namespace {

Vector v2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// All weights zero, readout bias c: the constant policy s -> c.
PolicyNet constant_net(const Vector& c) {
  const auto d = static_cast<int>(c.size());
  Architecture arch{d, {4}, d, Activation::relu};
  return PolicyNet(arch, {Layer{Matrix::Zero(4, d), Vector::Zero(4)}, Layer{Matrix::Zero(d, 4), c}});
}

const Architecture kSmall{2, {16, 16}, 2, Activation::relu};
const InitScheme kInit{InitKind::gaussian, 1.0, 0.2};

void check_replay(const Trajectory& traj, const EnvSpec& env) {
  for (std::size_t t = 0; t < traj.horizon(); ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    REQUIRE(traj.states.col(c + 1) == step(env, traj.states.col(c), traj.actions.col(c)));
  }
}

}  // namespace

TEST_CASE("constant policy moves ballistically") {
  const Vector c = v2(0.25, -0.5);
  const Vector s0 = v2(1, 1);
  const auto traj = rollout_fixed(constant_net(c), EnvSpec{}, s0, 40);
  REQUIRE(traj.states.cols() == 41);
  for (int t = 0; t <= 40; ++t) CHECK(traj.states.col(t) == s0 + c * t);
}

TEST_CASE("zero net stays put") {
  const auto traj = rollout_fixed(constant_net(v2(0, 0)), EnvSpec{}, v2(3, -2), 25);
  for (int t = 0; t <= 25; ++t) CHECK(traj.states.col(t) == v2(3, -2));
}

TEST_CASE("fixed rollouts replay step by step, including the periodic shortcut") {
  EnvSpec env;
  env.delta_cap = 0.1;
  env.box_halfwidth = 1.0;
  HallwaySpec h;
  h.wall_x = 0.5;
  h.gap_center = Vector::Zero(1);
  env.barrier = h;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = sample_policy(kSmall, {InitKind::gaussian, 1.0, 1.0}, seed);
    const auto traj = rollout_fixed(net, env, v2(0, 0), 300);
    check_replay(traj, env);
    for (int t = 0; t < 300; ++t) CHECK(traj.actions.col(t) == net(traj.states.col(t)));
  }
}

TEST_CASE("rollouts reject bad inputs") {
  const auto net = sample_policy(kSmall, kInit, 1);
  CHECK_THROWS_AS(rollout_fixed(net, EnvSpec{}, Vector::Zero(3), 10), DimensionError);
  CHECK_THROWS_AS(rollout_fixed(net, EnvSpec{}, v2(0, 0), 0), InvalidArgument);
  EnvSpec three;
  three.dim = 3;
  CHECK_THROWS_AS(rollout_fixed(net, three, Vector::Zero(3), 10), DimensionError);
  CHECK_THROWS_AS(rollout_hybrid(net, kSmall, kInit, EnvSpec{}, v2(0, 0), 10, 11, 1),
                  InvalidArgument);
  ResetSchedule bad;
  bad.p0 = 1.5;
  CHECK_THROWS_AS(rollout_stochastic_reset(net, kSmall, kInit, EnvSpec{}, v2(0, 0), 10, bad, 1),
                  InvalidArgument);
}

TEST_CASE("resampling with zero variances freezes the agent") {
  const auto traj =
      rollout_resample(kSmall, {InitKind::gaussian, 0.0, 0.0}, EnvSpec{}, v2(0.4, 0.1), 30, 5);
  for (int t = 0; t <= 30; ++t) CHECK(traj.states.col(t) == v2(0.4, 0.1));
}

TEST_CASE("resampled rollouts replay from their seeds") {
  EnvSpec env;
  env.delta_cap = 0.2;
  const auto a = rollout_resample(kSmall, kInit, env, v2(0, 0), 100, 77);
  const auto b = rollout_resample(kSmall, kInit, env, v2(0, 0), 100, 77);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
  REQUIRE(a.policy_seeds.size() == 100);
  for (std::size_t t = 0; t < 100; ++t) {
    CHECK(a.policy_seeds[t] == split_seed(77, t));
    const auto c = static_cast<Eigen::Index>(t);
    CHECK(a.actions.col(c) == sample_forward(kSmall, kInit, a.states.col(c), a.policy_seeds[t]));
  }
  check_replay(a, env);
  const auto other = rollout_resample(kSmall, kInit, env, v2(0, 0), 100, 78);
  CHECK(other.states != a.states);
}

TEST_CASE("gp rollout with no bias is absorbed at the origin") {
  const KernelSpec spec{KernelFamily::relu_arccos, 1.0, 0.0, 1.0};
  const auto traj = rollout_gp(spec, DiffusionConvention::pi_scaled, EnvSpec{}, v2(0, 0), 50, 3);
  CHECK(traj.actions.isZero(0.0));
  CHECK(traj.states.isZero(0.0));
}

TEST_CASE("gp rollout one-step second moment") {
  const KernelSpec spec{KernelFamily::relu_arccos, std::numbers::pi, 0.0, 1.0};
  const Vector s0 = v2(0.6, 0.8);
  const int n = 100'000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto traj = rollout_gp(spec, DiffusionConvention::pi_scaled, EnvSpec{}, s0, 1, i);
    total += traj.states.col(1).squaredNorm();
  }
  CHECK(total / n == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("hybrid boundary cases reproduce the pure modes") {
  EnvSpec env;
  env.delta_cap = 0.1;
  const auto net = sample_policy(kSmall, kInit, 9);
  const auto resampled = rollout_resample(kSmall, kInit, env, v2(0, 0), 60, 4);
  const auto fixed = rollout_fixed(net, env, v2(0, 0), 60);
  const auto h0 = rollout_hybrid(net, kSmall, kInit, env, v2(0, 0), 60, 0, 4);
  const auto hT = rollout_hybrid(net, kSmall, kInit, env, v2(0, 0), 60, 60, 4);
  CHECK(h0.states == resampled.states);
  CHECK(h0.actions == resampled.actions);
  CHECK(hT.states == fixed.states);
  CHECK(hT.actions == fixed.actions);

  const auto mid = rollout_hybrid(net, kSmall, kInit, env, v2(0, 0), 60, 20, 4);
  CHECK(mid.states.leftCols(21) == fixed.states.leftCols(21));
  CHECK(mid.policy_seeds.size() == 40);
  check_replay(mid, env);
}

TEST_CASE("stochastic reset boundary cases reproduce the pure modes") {
  EnvSpec env;
  env.delta_cap = 0.1;
  const auto net = sample_policy(kSmall, kInit, 9);
  ResetSchedule never;
  ResetSchedule always;
  always.p0 = 1.0;
  const auto r0 = rollout_stochastic_reset(net, kSmall, kInit, env, v2(0, 0), 60, never, 4);
  const auto r1 = rollout_stochastic_reset(net, kSmall, kInit, env, v2(0, 0), 60, always, 4);
  CHECK(r0.states == rollout_fixed(net, env, v2(0, 0), 60).states);
  const auto resampled = rollout_resample(kSmall, kInit, env, v2(0, 0), 60, 4);
  CHECK(r1.states == resampled.states);
  CHECK(r1.actions == resampled.actions);
  CHECK(r1.policy_seeds == resampled.policy_seeds);
}

TEST_CASE("stochastic reset keeps a drawn network until the next reset") {
  EnvSpec env;
  const auto net = sample_policy(kSmall, kInit, 9);
  ResetSchedule sched;
  sched.p0 = 0.3;
  const std::size_t horizon = 200;
  const auto traj = rollout_stochastic_reset(net, kSmall, kInit, env, v2(0.1, 0.1), horizon, sched, 6);
  check_replay(traj, env);

  Rng coin(split_seed(6, kResetKey));
  std::vector<bool> reset(horizon);
  for (std::size_t t = 0; t < horizon; ++t) reset[t] = coin.uniform() < 0.3;
  std::size_t n_resets = 0;
  std::optional<PolicyNet> current;
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    if (reset[t]) {
      ++n_resets;
      current.emplace(sample_policy(kSmall, kInit, split_seed(6, t)));
      // A network used for one step only is evaluated by the per-unit sampler.
      if (t + 1 == horizon || reset[t + 1]) continue;
    }
    CHECK(traj.actions.col(c) == (current ? (*current)(traj.states.col(c)) : net(traj.states.col(c))));
  }
  CHECK(traj.policy_seeds.size() == n_resets);
}

TEST_CASE("linear ramp resets about T/2 times") {
  ResetSchedule ramp;
  ramp.kind = ResetSchedule::Kind::linear;
  ramp.p0 = 0.0;
  ramp.p1 = 1.0;
  CHECK(ramp.at(0, 1000) == 0.0);
  CHECK(ramp.at(999, 1000) == 1.0);
  const Architecture tiny{2, {4}, 2, Activation::relu};
  const auto net = sample_policy(tiny, kInit, 1);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    total += static_cast<double>(
        rollout_stochastic_reset(net, tiny, kInit, EnvSpec{}, v2(0, 0), 1000, ramp, seed)
            .policy_seeds.size());
  const double mean = total / 200.0;
  CHECK(std::abs(mean - 500.0) < 3.0 * std::sqrt(1000.0 / 4.0));
}

TEST_CASE("ensembles are independent of thread count and order") {
  EnsembleConfig cfg;
  cfg.mode.kind = RolloutKind::hybrid;
  cfg.mode.n_switch = 5;
  cfg.fixed_prior = {kSmall, kInit};
  cfg.step_prior = {kSmall, {InitKind::gaussian, 0.1, 0.1}};
  EnvSpec env;
  env.delta_cap = 0.1;
  const auto one = run_ensemble(cfg, env, v2(0, 0), 30, 12, 99, 1);
  const auto four = run_ensemble(cfg, env, v2(0, 0), 30, 12, 99, 4);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(one.trajectories[i].states == four.trajectories[i].states);
    const auto single = rollout_member(cfg, env, v2(0, 0), 30, 99, 11 - i);
    CHECK(single.states == one.trajectories[11 - i].states);
  }
  CHECK_THROWS_AS(run_ensemble(cfg, env, v2(0, 0), 30, 0, 99), InvalidArgument);
}

TEST_CASE("single-member ensemble equals the direct rollout") {
  EnsembleConfig cfg;
  cfg.mode.kind = RolloutKind::per_step_resample;
  cfg.step_prior = {kSmall, kInit};
  const auto ens = run_ensemble(cfg, EnvSpec{}, v2(0, 0), 20, 1, 5);
  const auto direct = rollout_resample(kSmall, kInit, EnvSpec{}, v2(0, 0), 20, split_seed(5, 0));
  CHECK(ens.trajectories[0].states == direct.states);
}

TEST_CASE("per-step increments at a revisited state are uncorrelated") {
  // L_a this small leaves the state bit-identical, so every step revisits s0.
  EnvSpec env;
  env.lipschitz_action = 1e-300;
  const int n = 10'000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const auto traj = rollout_resample(kSmall, kInit, env, v2(0.5, -0.3), 2, i);
    REQUIRE(traj.states.col(1) == traj.states.col(0));
    const double x = traj.actions(0, 0);
    const double y = traj.actions(0, 1);
    sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
  }
  const double cov = sxy / n - sx / n * sy / n;
  const double rho = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(rho) < 3.0 / std::sqrt(n));
}

TEST_CASE("fixed-policy ensembles are ballistic and rbf gp ensembles diffusive") {
  EnvSpec env;
  env.delta_cap = 0.05;
  EnsembleConfig fixed;
  fixed.fixed_prior = {Architecture{2, {64, 64}, 2, Activation::relu}, {InitKind::gaussian, 1.0, 0.1}};
  const auto ens = run_ensemble(fixed, env, v2(0, 0), 50, 200, 1);
  const auto slope = msd_exponent(msd(ens), 1, 50).slope;
  CHECK(slope >= 1.8);
  CHECK(slope <= 2.05);

  EnsembleConfig gp;
  gp.mode.kind = RolloutKind::per_step_gp;
  gp.kernel = {KernelFamily::rbf, 0.01, 0.0, 1.0};
  const auto diff = run_ensemble(gp, EnvSpec{}, v2(0, 0), 500, 400, 2);
  const auto dslope = msd_exponent(msd(diff), 10, 500).slope;
  CHECK(dslope >= 0.9);
  CHECK(dslope <= 1.1);
}

TEST_CASE("per-step resampled ensembles develop a heavy tail") {
  EnsembleConfig cfg;
  cfg.mode.kind = RolloutKind::per_step_resample;
  cfg.step_prior = {Architecture{2, {512, 512}, 2, Activation::relu}, {InitKind::gaussian, 0.05, 0.05}};
  const auto ens = run_ensemble(cfg, EnvSpec{}, v2(0, 0), 2000, 400, 8);
  std::vector<double> radii;
  for (const auto& traj : ens.trajectories) radii.push_back(traj.states.col(2000).norm());
  std::sort(radii.begin(), radii.end());
  const double median = radii[radii.size() / 2];
  const auto density = radial_histogram(radii, 2, 20, radii.back() * 1.001, BinSpacing::log,
                                        0.25 * median);
  const auto fit = tail_exponent(density, median, radii.back());
  MESSAGE("tail slope " << fit.slope);
  CHECK(fit.slope >= -3.0);
  CHECK(fit.slope <= -1.0);
}
