#include "polexp/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "polexp/error.hpp"
#include "polexp/fokker_planck.hpp"
#include "polexp/rng.hpp"

namespace polexp::cli {
namespace {

using nlohmann::json;

std::vector<std::string> state_columns(const std::string& prefix, int dim) {
  std::vector<std::string> cols;
  for (int k = 0; k < dim; ++k) cols.push_back(prefix + std::to_string(k));
  return cols;
}

json rate_json(const PassageRate& r) {
  return {{"passed", r.passed}, {"total", r.total}, {"rate", r.rate},
          {"lower", r.lower},   {"upper", r.upper}};
}

PolicyNet ensemble_fixed_net(const PolicyPrior& prior, std::uint64_t master, std::size_t i) {
  return sample_policy(prior.arch, prior.init, split_seed(split_seed(master, i), kFixedNetKey));
}

}  // namespace

double crossover_radius(const KernelSpec& spec, DiffusionConvention convention) {
  const double kappa = convention == DiffusionConvention::pi_scaled ? 1.0 / std::numbers::pi : 1.0;
  return std::sqrt(spec.sigma_b2 / (kappa * spec.sigma_w2));
}

RunResult run_rollout(const Parsed<RolloutConfig>& p) {
  const auto& c = p.config;
  const Provenance prov{p.hash, to_string(c.ensemble.mode.kind), p.run.seed};
  const auto ens =
      run_ensemble(c.ensemble, c.env, c.s0, c.horizon, c.n, p.run.seed, p.run.threads);

  std::vector<std::string> cols{"traj_id", "t"};
  for (const auto& s : state_columns("s_", c.env.dim)) cols.push_back(s);
  for (const auto& a : state_columns("a_", c.env.dim)) cols.push_back(a);
  Csv traj(prov, cols);
  for (std::size_t i = 0; i < ens.trajectories.size(); ++i) {
    const auto& tr = ens.trajectories[i];
    for (std::size_t t = 0; t <= c.horizon; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      traj.cell(i).cell(t);
      for (int k = 0; k < c.env.dim; ++k) traj.cell(tr.states(k, col));
      for (int k = 0; k < c.env.dim; ++k) {
        if (t < c.horizon) traj.cell(tr.actions(k, col));
        else traj.blank();
      }
      traj.end_row();
    }
  }

  const auto series = msd(ens);
  Csv msd_csv(prov, {"t", "msd"});
  for (std::size_t t = 0; t < series.size(); ++t) {
    msd_csv.cell(t).cell(series[t]);
    msd_csv.end_row();
  }

  RunResult out;
  out.summary = {{"N", c.n}, {"T", c.horizon}, {"final_msd", series.back()}};
  if (c.msd_window) {
    const auto [lo, hi] = *c.msd_window;
    const auto fit = msd_exponent(series, lo, hi);
    out.summary["msd_exponent"] = {
        {"t_lo", lo}, {"t_hi", hi}, {"slope", fit.slope}, {"stderr", fit.standard_error}};
  }
  out.files = {{"trajectories.csv", traj.str()},
               {"msd.csv", msd_csv.str()},
               {"rollout.json", json_file(out.summary, prov)}};
  return out;
}

RunResult run_kernel(const Parsed<KernelConfig>& p) {
  const auto& c = p.config;
  const Provenance prov{p.hash, to_string(c.spec.family), p.run.seed};
  const Matrix k = kernel_matrix(c.spec, c.states, c.jitter);
  const auto n = k.rows();
  const int dim = static_cast<int>(c.states.cols());

  Csv kcsv(prov, {"i", "j", "k"});
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      kcsv.cell(static_cast<std::int64_t>(i)).cell(static_cast<std::int64_t>(j)).cell(k(i, j));
      kcsv.end_row();
    }

  std::vector<std::string> cols{"i"};
  for (const auto& s : state_columns("s_", dim)) cols.push_back(s);
  cols.insert(cols.end(), {"k_diag", "diffusion_pi_scaled", "diffusion_kernel_diagonal"});
  Csv states(prov, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector s = c.states.row(i).transpose();
    states.cell(static_cast<std::int64_t>(i));
    for (int d = 0; d < dim; ++d) states.cell(s(d));
    states.cell(kernel(c.spec, s, s))
        .cell(diffusion_coefficient(c.spec, DiffusionConvention::pi_scaled, s))
        .cell(diffusion_coefficient(c.spec, DiffusionConvention::kernel_diagonal, s));
    states.end_row();
  }

  RunResult out;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
  out.summary = {{"n_states", n},
                 {"dim", dim},
                 {"jitter", c.jitter},
                 {"min_eigenvalue", eig.eigenvalues().minCoeff()},
                 {"max_eigenvalue", eig.eigenvalues().maxCoeff()}};
  std::vector<std::string> sample_cols{"i"};
  for (const auto& a : state_columns("a_", dim)) sample_cols.push_back(a);
  Csv sample(prov, sample_cols);
  try {
    const auto chol = cholesky_with_jitter(k);
    out.summary["cholesky"] = {{"ok", true}, {"added_jitter", chol.added_jitter}};
    const Matrix a = gp_sample_actions(c.spec, c.states, dim, p.run.seed);
    for (Eigen::Index i = 0; i < n; ++i) {
      sample.cell(static_cast<std::int64_t>(i));
      for (int d = 0; d < dim; ++d) sample.cell(a(i, d));
      sample.end_row();
    }
  } catch (const FactorizationError& e) {
    out.summary["cholesky"] = {{"ok", false}, {"error", e.what()}};
    out.warnings.push_back(std::string("no GP sample written: ") + e.what());
  }
  out.files = {{"kernel.csv", kcsv.str()},
               {"states.csv", states.str()},
               {"gp_sample.csv", sample.str()},
               {"kernel.json", json_file(out.summary, prov)}};
  return out;
}

RunResult run_bound_check(const Parsed<BoundCheckConfig>& p) {
  const auto& c = p.config;
  const bool geometric = c.env.lipschitz_state != 1.0;
  const Provenance prov{p.hash, "fixed", p.run.seed};
  RunResult out;
  if (geometric)
    out.warnings.push_back("L_s = " + format_double(c.env.lipschitz_state) +
                           " != 1: checking the geometric bound k t (A^t - 1)/(A - 1)");

  std::vector<BallisticReport> reports(c.n);
  parallel_for(c.n, p.run.threads, [&](std::size_t i) {
    const auto net = ensemble_fixed_net(c.prior, p.run.seed, i);
    const double lip = lipschitz_upper_bound(net);
    const auto traj = rollout_fixed(net, c.env, c.s0, c.horizon);
    const Vector drift = drift_estimate(traj, c.drift);
    reports[i] = geometric ? check_geometric_bound(traj, c.env, lip, drift)
                           : check_ballistic_bound(traj, c.env, lip, drift);
  });

  Csv csv(prov, {"traj_id", "t", "eps", "bound"});
  json per_traj = json::array();
  std::size_t total = 0;
  std::size_t with_violations = 0;
  double max_ratio = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    for (std::size_t t = 0; t < r.eps_series.size(); ++t) {
      csv.cell(i).cell(t).cell(r.eps_series[t]).cell(r.bound_series[t]);
      csv.end_row();
      if (r.bound_series[t] > 0.0) max_ratio = std::max(max_ratio, r.eps_series[t] / r.bound_series[t]);
    }
    total += r.violations.size();
    if (!r.violations.empty()) ++with_violations;
    per_traj.push_back({{"traj_id", i},
                        {"lipschitz_policy", r.lipschitz_policy},
                        {"c_norm", r.c.norm()},
                        {"k", r.k},
                        {"validity_horizon", std::isfinite(r.horizon) ? json(r.horizon) : json("inf")},
                        {"violations", r.violations}});
  }
  out.summary = {{"kind", geometric ? "geometric" : "quadratic"},
                 {"N", c.n},
                 {"T", c.horizon},
                 {"total_violations", total},
                 {"trajectories_with_violations", with_violations},
                 {"max_eps_over_bound", max_ratio}};
  json body = out.summary;
  body["trajectories"] = per_traj;
  out.files = {{"bound_check.csv", csv.str()}, {"bound_check.json", json_file(body, prov)}};
  return out;
}

RunResult run_hallway(const Parsed<HallwayConfig>& p) {
  const auto& c = p.config;
  const auto& hall = *c.env.barrier;
  const Provenance prov{p.hash, "hallway", p.run.seed};
  RunResult out;

  // The switching window depends on L_pi, which varies from net to net; the
  // median certified bound over a few fixed nets stands in for it.
  std::vector<double> lips;
  for (std::size_t i = 0; i < std::min<std::size_t>(c.n, 16); ++i)
    lips.push_back(lipschitz_upper_bound(ensemble_fixed_net(c.fixed_prior, p.run.seed, i)));
  std::nth_element(lips.begin(), lips.begin() + static_cast<long>(lips.size() / 2), lips.end());
  const double lip = lips[lips.size() / 2];
  const auto window = switch_step_heuristic(lip, hall.wall_x - c.s0(0), *c.env.delta_cap, c.much_less);
  const std::size_t n_switch =
      c.n_switch.value_or(static_cast<std::size_t>(std::clamp<long long>(
          window.n_min, 0, static_cast<long long>(c.horizon))));
  if (!window.feasible && !c.n_switch)
    out.warnings.push_back("switching window is empty (n_min = " + std::to_string(window.n_min) +
                           " > n_max = " + std::to_string(window.n_max) +
                           "); using n_switch = n_min");

  std::vector<std::string> cols{"mode", "traj_id", "t"};
  for (const auto& s : state_columns("s_", c.env.dim)) cols.push_back(s);
  Csv passage(prov, {"mode", "passed", "total", "rate", "lower", "upper"});
  Csv samples(prov, cols);
  json modes = json::object();
  std::map<RolloutKind, PassageRate> rates;

  for (const auto kind : c.modes) {
    EnsembleConfig e;
    e.mode.kind = kind;
    e.mode.n_switch = n_switch;
    e.mode.schedule = c.schedule;
    e.fixed_prior = c.fixed_prior;
    e.step_prior = c.step_prior;
    const std::size_t n_samples = std::min(c.samples, c.n);
    std::vector<char> passed(c.n, 0);
    std::vector<Trajectory> kept(n_samples);
    parallel_for(c.n, p.run.threads, [&](std::size_t i) {
      auto traj = rollout_member(e, c.env, c.s0, c.horizon, p.run.seed, i);
      passed[i] = (traj.states.row(0).array() > c.target_x).any();
      if (i < n_samples) kept[i] = std::move(traj);
    });
    const auto rate = wilson_interval(
        static_cast<std::size_t>(std::count(passed.begin(), passed.end(), 1)), c.n);
    rates[kind] = rate;
    modes[to_string(kind)] = rate_json(rate);
    passage.cell(to_string(kind)).cell(rate.passed).cell(rate.total).cell(rate.rate)
        .cell(rate.lower).cell(rate.upper);
    passage.end_row();
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (Eigen::Index t = 0; t < kept[i].states.cols(); ++t) {
        samples.cell(to_string(kind)).cell(i).cell(static_cast<std::int64_t>(t));
        for (int k = 0; k < c.env.dim; ++k) samples.cell(kept[i].states(k, t));
        samples.end_row();
      }
  }

  out.summary = {{"N", c.n},
                 {"T", c.horizon},
                 {"target_x", c.target_x},
                 {"n_switch", n_switch},
                 {"switch_window",
                  {{"n_min", window.n_min},
                   {"n_max", window.n_max},
                   {"feasible", window.feasible},
                   {"median_lipschitz_policy", lip}}},
                 {"modes", modes}};
  if (rates.count(RolloutKind::hybrid)) {
    const auto& h = rates[RolloutKind::hybrid];
    json ordering = json::object();
    for (const auto other : {RolloutKind::fixed, RolloutKind::per_step_resample}) {
      if (!rates.count(other)) continue;
      const auto& o = rates[other];
      ordering[std::string("hybrid_vs_") + to_string(other)] = {
          {"hybrid_higher", h.rate > o.rate}, {"intervals_disjoint", h.lower > o.upper}};
    }
    out.summary["ordering"] = ordering;
  }
  out.files = {{"passage.csv", passage.str()},
               {"samples.csv", samples.str()},
               {"hallway.json", json_file(out.summary, prov)}};
  return out;
}

RunResult run_steady_state(const Parsed<SteadyStateConfig>& p) {
  const auto& c = p.config;
  const Provenance prov{p.hash, "per_step_gp", p.run.seed};
  RunResult out;
  const double r_c = crossover_radius(c.kernel, c.convention);

  EnvSpec env;
  env.dim = c.dim;
  EnsembleConfig e;
  e.mode.kind = RolloutKind::per_step_gp;
  e.kernel = c.kernel;
  e.convention = c.convention;
  const Vector s0 = Vector::Zero(c.dim);
  std::vector<double> radii(c.n);
  parallel_for(c.n, p.run.threads, [&](std::size_t i) {
    const auto traj = rollout_member(e, env, s0, c.horizon, p.run.seed, i);
    radii[i] = traj.states.col(static_cast<Eigen::Index>(c.horizon)).norm();
  });
  std::vector<double> sorted = radii;
  std::sort(sorted.begin(), sorted.end());

  // Log shells from well inside the core out to the farthest sample; the fit
  // starts past the crossover and stops before the sparse outer tenth.
  const double r_min = c.r_min.value_or(0.25 * r_c);
  const double r_max = c.r_max.value_or(std::nextafter(sorted.back(), INFINITY));
  if (!(r_max > r_min)) throw InvalidArgument("steady-state: r_max must exceed r_min");
  const double fit_lo = c.fit_lo.value_or(2.0 * r_c);
  const double fit_hi = c.fit_hi.value_or(sorted[sorted.size() * 9 / 10]);
  const auto hist = radial_histogram(radii, c.dim, c.bins, r_max, BinSpacing::log, r_min);
  const auto fit = tail_exponent(hist, fit_lo, fit_hi);

  FPConfig fp;
  fp.dim = c.dim;
  fp.sigma_w2 = c.kernel.sigma_w2;
  fp.sigma_b2 = c.kernel.sigma_b2;
  fp.convention = c.convention;
  fp.radius = c.fp_radius.value_or(10.0 * r_c);
  fp.n_cells = c.fp_cells;
  fp.dt = 0.9 * fp.max_stable_dt();

  Csv csv(prov, {"r", "value", "form", "t", "grid"});
  auto emit = [&](const RadialDensity& d, const std::string& form, double t, const char* grid) {
    const auto centers = d.centers();
    for (std::size_t i = 0; i < d.size(); ++i) {
      csv.cell(centers[i]).cell(d.values[i]).cell(form).cell(t).cell(grid);
      csv.end_row();
    }
  };
  emit(hist, "empirical", static_cast<double>(c.horizon), "histogram");

  json closed = json::object();
  for (const auto form : {StationaryForm::half_dim_power, StationaryForm::zero_flux}) {
    RadialDensity d = hist;
    d.counts.reset();
    d.mass_outside = 0.0;
    d.form = form == StationaryForm::zero_flux ? DensityForm::zero_flux : DensityForm::half_dim_power;
    const auto centers = d.centers();
    for (std::size_t i = 0; i < d.size(); ++i) d.values[i] = stationary_profile(form, fp, centers[i]);
    d.normalize();
    emit(d, to_string(form), INFINITY, "histogram");
    const auto f = tail_exponent(d, fit_lo, fit_hi);
    const double asymptotic = form == StationaryForm::zero_flux ? -2.0 : -static_cast<double>(c.dim);
    closed[to_string(form)] = {{"asymptotic_slope", asymptotic},
                               {"fitted_slope", f.slope},
                               {"empirical_minus_fitted", fit.slope - f.slope}};
  }

  // Relax the radial equation from a narrow bump until it stops moving.
  auto state = gaussian_density(fp, std::pow(fp.radius / 20.0, 2));
  const double mass0 = state.mass();
  constexpr std::size_t kChunk = 2000;
  constexpr std::size_t kMaxSteps = 4'000'000;
  constexpr double kSettled = 1e-7;  // L1 change per unit time
  std::size_t steps = 0;
  double drift_rate = INFINITY;
  while (steps < kMaxSteps && drift_rate > kSettled) {
    auto next = evolve_radial(fp, state, {kChunk, 0}).back();
    drift_rate = compare_l1(next, state) / (kChunk * fp.dt);
    state = std::move(next);
    steps += kChunk;
  }
  if (drift_rate > kSettled)
    out.warnings.push_back("Fokker-Planck solution still moving after " + std::to_string(steps) +
                           " steps");
  emit(state, "numeric", state.time, "fp");
  json fp_json{{"radius", fp.radius},       {"n_cells", fp.n_cells},
               {"dt", fp.dt},               {"steps", steps},
               {"t_final", state.time},     {"l1_change_per_time", drift_rate},
               {"mass_relative_error", std::abs(state.mass() - mass0) / mass0}};
  for (const auto form : {StationaryForm::half_dim_power, StationaryForm::zero_flux}) {
    const auto ref = stationary_closed_form(form, fp);
    emit(ref, to_string(form), INFINITY, "fp");
    fp_json[std::string("l1_to_") + to_string(form)] = compare_l1(state, ref);
  }

  out.summary = {{"dim", c.dim},
                 {"N", c.n},
                 {"T", c.horizon},
                 {"crossover_radius", r_c},
                 {"histogram",
                  {{"bins", c.bins},
                   {"r_min", r_min},
                   {"r_max", r_max},
                   {"mass_outside", hist.mass_outside}}},
                 {"tail_fit",
                  {{"r_lo", fit_lo},
                   {"r_hi", fit_hi},
                   {"slope", fit.slope},
                   {"stderr", fit.slope_stderr},
                   {"n_points", fit.n_points}}},
                 {"closed_forms", closed},
                 {"fokker_planck", fp_json}};
  out.files = {{"densities.csv", csv.str()},
               {"steady_state.json", json_file(out.summary, prov)}};
  return out;
}

}  // namespace polexp::cli
