#include "polexp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polexp/error.hpp"

namespace polexp {
namespace {

struct LineFit {
  double slope = 0.0;
  double standard_error = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - my - fit.slope * (x[i] - mx);
      ssr += r * r;
    }
    fit.standard_error = std::sqrt(ssr / (n - 2.0) / sxx);
  }
  return fit;
}

// The dynamics with the wall and the box removed: the straight reference path.
EnvSpec free_dynamics(const EnvSpec& env) {
  EnvSpec free = env;
  free.barrier.reset();
  free.box_halfwidth.reset();
  return free;
}

BallisticReport compare_to_reference(const Trajectory& traj, const EnvSpec& env,
                                     double lipschitz_policy, const VectorRef& c) {
  if (!env.delta_cap)
    throw InvalidArgument("ballistic bound: env has no displacement cap (delta)");
  if (c.size() != env.dim) throw DimensionError("ballistic bound: c has the wrong dimension");
  const EnvSpec free = free_dynamics(env);
  BallisticReport report;
  report.c = c;
  report.lipschitz_policy = lipschitz_policy;
  report.k = *env.delta_cap * env.lipschitz_action * lipschitz_policy;
  // s + P(d) with P the cap projection is (1 + |L_s - 1|)-Lipschitz in s, which
  // is L_s itself only when L_s >= 1.
  report.growth = 1.0 + std::abs(env.lipschitz_state - 1.0);
  report.horizon =
      validity_horizon(c.norm(), *env.delta_cap, env.lipschitz_action, lipschitz_policy);
  const std::size_t steps = traj.horizon();
  report.eps_series.resize(steps + 1);
  Vector reference = traj.states.col(0);
  for (std::size_t t = 0; t <= steps; ++t) {
    if (t > 0) reference = step(free, reference, c);
    report.eps_series[t] = (traj.states.col(static_cast<Eigen::Index>(t)) - reference).norm();
  }
  return report;
}

void collect_violations(BallisticReport& report) {
  for (std::size_t t = 0; t < report.eps_series.size(); ++t)
    if (report.eps_series[t] > report.bound_series[t] + kBoundTolerance)
      report.violations.push_back(t);
}

}  // namespace

Vector drift_estimate(const Trajectory& traj, DriftMethod method) {
  if (traj.horizon() == 0) throw InvalidArgument("drift_estimate: empty trajectory");
  if (method == DriftMethod::first_action) return traj.actions.col(0);
  return traj.actions.rowwise().mean();
}

std::vector<double> ballistic_error(const Trajectory& traj, const VectorRef& c) {
  std::vector<double> eps(traj.horizon() + 1, 0.0);
  const Vector s0 = traj.states.col(0);
  for (std::size_t t = 1; t < eps.size(); ++t)
    eps[t] = (traj.states.col(static_cast<Eigen::Index>(t)) - s0 - c * static_cast<double>(t))
                 .norm();
  return eps;
}

BallisticReport check_ballistic_bound(const Trajectory& traj, const EnvSpec& env,
                                      double lipschitz_policy, const VectorRef& c) {
  if (env.lipschitz_state != 1.0)
    throw InvalidArgument("ballistic bound: requires L_s = 1, got L_s = " +
                          std::to_string(env.lipschitz_state) +
                          "; use the geometric bound instead");
  auto report = compare_to_reference(traj, env, lipschitz_policy, c);
  report.kind = BoundKind::quadratic;
  report.bound_series.resize(report.eps_series.size());
  for (std::size_t t = 0; t < report.bound_series.size(); ++t) {
    const double td = static_cast<double>(t);
    report.bound_series[t] = 0.5 * report.k * td * td;
  }
  collect_violations(report);
  return report;
}

BallisticReport check_geometric_bound(const Trajectory& traj, const EnvSpec& env,
                                      double lipschitz_policy, const VectorRef& c) {
  if (env.lipschitz_state == 1.0)
    throw InvalidArgument("geometric bound: L_s = 1, use the quadratic bound");
  auto report = compare_to_reference(traj, env, lipschitz_policy, c);
  report.kind = BoundKind::geometric;
  report.bound_series.resize(report.eps_series.size());
  for (std::size_t t = 0; t < report.bound_series.size(); ++t)
    report.bound_series[t] =
        geometric_bound(report.growth, report.k, 0.0, static_cast<double>(t));
  collect_violations(report);
  return report;
}

double validity_horizon(double c_norm, double delta, double lipschitz_action,
                        double lipschitz_policy) {
  const double denom = delta * lipschitz_action * lipschitz_policy;
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * c_norm / denom;
}

RecurrenceCheck recurrence_oracle_quadratic(double k, double eps0, std::size_t horizon) {
  if (!(k >= 0.0) || !(eps0 >= 0.0))
    throw InvalidArgument("recurrence_oracle_quadratic: k and eps0 must be >= 0");
  RecurrenceCheck check;
  check.iterates.resize(horizon + 1);
  check.bound.resize(horizon + 1);
  check.iterates[0] = eps0;
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double td = static_cast<double>(t);
    if (t > 0) check.iterates[t] = check.iterates[t - 1] + k * (td - 1.0);
    check.bound[t] = k * td * td / 2.0 + eps0;
    if (check.iterates[t] > check.bound[t] + kBoundTolerance) check.violations.push_back(t);
  }
  return check;
}

double geometric_bound(double a, double k, double eps0, double t) {
  return k * t * (std::pow(a, t) - 1.0) / (a - 1.0) + eps0;
}

double contractive_bound(double a, double k, double eps0, double t) {
  return k * t / (1.0 - a) + eps0;
}

RecurrenceCheck recurrence_oracle_geometric(double a, double k, double eps0,
                                            std::size_t horizon) {
  if (!(a > 0.0)) throw InvalidArgument("recurrence_oracle_geometric: A must be > 0");
  if (a == 1.0)
    throw InvalidArgument("recurrence_oracle_geometric: A = 1 is the quadratic recurrence");
  if (!(k >= 0.0) || !(eps0 >= 0.0))
    throw InvalidArgument("recurrence_oracle_geometric: k and eps0 must be >= 0");
  RecurrenceCheck check;
  check.iterates.resize(horizon + 1);
  check.bound.resize(horizon + 1);
  check.iterates[0] = eps0;
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double td = static_cast<double>(t);
    if (t > 0) check.iterates[t] = a * check.iterates[t - 1] + k * (td - 1.0);
    check.bound[t] = geometric_bound(a, k, eps0, td);
    // Relative slack too: A^t reaches 1e28 at t = 60 for A = 3.
    const double tol = kBoundTolerance * std::max(1.0, check.bound[t]);
    if (check.iterates[t] > check.bound[t] + tol) check.violations.push_back(t);
  }
  return check;
}

std::vector<double> msd(const Ensemble& ens) {
  if (ens.trajectories.empty()) throw InvalidArgument("msd: empty ensemble");
  const std::size_t steps = ens.trajectories.front().horizon();
  std::vector<double> out(steps + 1, 0.0);
  for (const auto& traj : ens.trajectories) {
    if (traj.horizon() != steps) throw InvalidArgument("msd: trajectories differ in horizon");
    const auto s0 = traj.states.col(0);
    for (std::size_t t = 1; t <= steps; ++t)
      out[t] += (traj.states.col(static_cast<Eigen::Index>(t)) - s0).squaredNorm();
  }
  const double n = static_cast<double>(ens.trajectories.size());
  for (auto& v : out) v /= n;
  return out;
}

ExponentFit msd_exponent(const std::vector<double>& series, std::size_t t_lo, std::size_t t_hi) {
  if (t_lo < 1 || t_hi <= t_lo || t_hi >= series.size())
    throw InvalidArgument("msd_exponent: window [" + std::to_string(t_lo) + ", " +
                          std::to_string(t_hi) + "] outside the series");
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t t = t_lo; t <= t_hi; ++t) {
    if (!(series[t] > 0.0))
      throw InvalidArgument("msd_exponent: nonpositive msd at t = " + std::to_string(t));
    x.push_back(std::log(static_cast<double>(t)));
    y.push_back(std::log(series[t]));
  }
  const auto fit = least_squares(x, y);
  return {fit.slope, fit.standard_error};
}

RadialDensity radial_histogram(const std::vector<double>& radii, int dim, std::size_t n_bins,
                               double r_max, BinSpacing spacing, double r_min) {
  if (radii.empty()) throw InvalidArgument("radial_histogram: no samples");
  if (n_bins == 0 || !(r_max > 0.0)) throw InvalidArgument("radial_histogram: bad binning");
  RadialDensity density;
  density.dim = dim;
  density.form = DensityForm::empirical;
  density.edges.resize(n_bins + 1);
  if (spacing == BinSpacing::linear) {
    for (std::size_t i = 0; i <= n_bins; ++i)
      density.edges[i] = r_max * static_cast<double>(i) / static_cast<double>(n_bins);
  } else {
    if (n_bins < 2 || !(r_min > 0.0) || !(r_min < r_max))
      throw InvalidArgument("radial_histogram: log spacing needs 0 < r_min < r_max, n_bins >= 2");
    density.log_spaced = true;
    density.edges[0] = 0.0;
    const double ratio = std::log(r_max / r_min);
    for (std::size_t k = 0; k < n_bins; ++k)
      density.edges[k + 1] =
          r_min * std::exp(ratio * static_cast<double>(k) / static_cast<double>(n_bins - 1));
    density.edges[n_bins] = r_max;
  }
  std::vector<long long> counts(n_bins, 0);
  std::size_t inside = 0;
  for (double r : radii) {
    if (r > r_max) continue;
    auto it = std::upper_bound(density.edges.begin(), density.edges.end(), r);
    auto bin = static_cast<std::size_t>(it - density.edges.begin()) - 1;
    bin = std::min(bin, n_bins - 1);
    ++counts[bin];
    ++inside;
  }
  if (inside == 0) throw InvalidArgument("radial_histogram: every sample lies beyond r_max");
  density.mass_outside =
      static_cast<double>(radii.size() - inside) / static_cast<double>(radii.size());
  const auto vol = density.shell_volumes();
  density.values.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    density.values[i] = static_cast<double>(counts[i]) / (static_cast<double>(inside) * vol[i]);
  density.counts = std::move(counts);
  return density;
}

RadialDensity radial_histogram(const Ensemble& ens, std::size_t t, std::size_t n_bins,
                               double r_max, BinSpacing spacing, double r_min) {
  if (ens.trajectories.empty()) throw InvalidArgument("radial_histogram: empty ensemble");
  std::vector<double> radii;
  radii.reserve(ens.trajectories.size());
  for (const auto& traj : ens.trajectories) {
    if (t > traj.horizon()) throw InvalidArgument("radial_histogram: step beyond horizon");
    radii.push_back(traj.states.col(static_cast<Eigen::Index>(t)).norm());
  }
  auto density = radial_histogram(radii, ens.env.dim, n_bins, r_max, spacing, r_min);
  density.time = static_cast<double>(t);
  return density;
}

TailFit tail_exponent(const RadialDensity& density, double r_lo, double r_hi) {
  const auto centers = density.centers();
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (centers[i] < r_lo || centers[i] > r_hi || !(centers[i] > 0.0)) continue;
    if (!(density.values[i] > 0.0)) continue;
    if (density.counts && (*density.counts)[i] < kMinTailCount) continue;
    x.push_back(std::log(centers[i]));
    y.push_back(std::log(density.values[i]));
  }
  if (x.size() < 5)
    throw InvalidArgument("tail_exponent: only " + std::to_string(x.size()) +
                          " usable shells in [" + std::to_string(r_lo) + ", " +
                          std::to_string(r_hi) + "], need 5");
  const auto fit = least_squares(x, y);
  return {fit.slope, fit.standard_error, r_lo, r_hi, static_cast<int>(x.size())};
}

PassageRate wilson_interval(std::size_t successes, std::size_t total) {
  PassageRate out;
  out.passed = successes;
  out.total = total;
  if (total == 0) return out;
  constexpr double z = 1.959963984540054;
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
  out.rate = p;
  out.lower = successes == 0 ? 0.0 : std::max(0.0, center - half);
  out.upper = successes == total ? 1.0 : std::min(1.0, center + half);
  return out;
}

PassageRate passage_rate(const Ensemble& ens, const HallwaySpec& hallway, double target_x) {
  if (!ens.env.barrier) throw InvalidArgument("passage_rate: ensemble env has no hallway");
  if (target_x < hallway.wall_x)
    throw InvalidArgument("passage_rate: target_x lies in front of the wall");
  std::size_t passed = 0;
  for (const auto& traj : ens.trajectories)
    if ((traj.states.row(0).array() > target_x).any()) ++passed;
  return wilson_interval(passed, ens.trajectories.size());
}

SwitchWindow switch_step_heuristic(double lipschitz_policy, double distance, double delta,
                                   double much_less) {
  if (!(lipschitz_policy > 0.0) || !(distance > 0.0) || !(delta > 0.0) || !(much_less > 0.0))
    throw InvalidArgument("switch_step_heuristic: arguments must be positive");
  // Guard ceil/floor against representation error (2 / 0.1 = 19.999...).
  constexpr double kRel = 1e-12;
  const double lo = 2.0 * distance / delta;
  const double hi = much_less / lipschitz_policy;
  SwitchWindow w;
  w.n_min = static_cast<long long>(std::ceil(lo * (1.0 - kRel)));
  w.n_max = static_cast<long long>(std::floor(hi * (1.0 + kRel)));
  w.feasible = w.n_min <= w.n_max;
  return w;
}

nlohmann::json to_json(const BallisticReport& report) {
  nlohmann::json j;
  j["kind"] = report.kind == BoundKind::quadratic ? "quadratic" : "geometric";
  j["c"] = std::vector<double>(report.c.begin(), report.c.end());
  j["lipschitz_policy"] = report.lipschitz_policy;
  j["k"] = report.k;
  j["growth"] = report.growth;
  j["horizon"] = std::isfinite(report.horizon) ? nlohmann::json(report.horizon)
                                               : nlohmann::json("inf");
  j["eps_series"] = report.eps_series;
  j["bound_series"] = report.bound_series;
  j["violations"] = report.violations;
  return j;
}

}  // namespace polexp
