#pragma once

// Quantitative checks on trajectories and ensembles: the ballistic error bound
// and its recurrence oracles, drift estimates, mean squared displacement,
// radial histograms and tail fits, hallway passage rates, and the switching
// step heuristic for hybrid rollouts.

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polexp/env.hpp"
#include "polexp/radial_density.hpp"
#include "polexp/rollout.hpp"

namespace polexp {

enum class DriftMethod { first_action, mean_action };

Vector drift_estimate(const Trajectory& traj, DriftMethod method);

/// eps_t = |s_t - s_0 - c t|, eps_0 = 0.
std::vector<double> ballistic_error(const Trajectory& traj, const VectorRef& c);

enum class BoundKind { quadratic, geometric };

/// Absolute slack on every bound comparison, for accumulated rounding.
inline constexpr double kBoundTolerance = 1e-9;

struct BallisticReport {
  Vector c;
  std::vector<double> eps_series;
  std::vector<double> bound_series;
  double horizon = 0.0;  // validity horizon, +inf when k = 0
  std::vector<std::size_t> violations;
  BoundKind kind = BoundKind::quadratic;
  double lipschitz_policy = 0.0;
  double k = 0.0;  // delta * L_a * L_pi
  double growth = 1.0;  // A = 1 + |L_s - 1| for the geometric bound
};

/// Checks |s_t - r_t| <= 1/2 delta L_a L_pi t^2 for a fixed-policy rollout,
/// where r_t is the straight path obtained by iterating the dynamics (without
/// the wall or box) from s_0 under the constant action c. When the cap does not
/// bind on c this is r_t = s_0 + L_a c t.
///
/// Requires env.delta_cap and L_s == 1; throws InvalidArgument otherwise
/// (use check_geometric_bound for L_s != 1).
BallisticReport check_ballistic_bound(const Trajectory& traj, const EnvSpec& env,
                                      double lipschitz_policy, const VectorRef& c);

/// The L_s != 1 variant: eps_t <= k t (A^t - 1)/(A - 1) with A = 1 + |L_s - 1|
/// (the growth factor of the capped map; A = L_s when L_s > 1).
BallisticReport check_geometric_bound(const Trajectory& traj, const EnvSpec& env,
                                      double lipschitz_policy, const VectorRef& c);

/// 2 |c| / (delta L_a L_pi); +inf when the denominator is zero.
double validity_horizon(double c_norm, double delta, double lipschitz_action,
                        double lipschitz_policy);

struct RecurrenceCheck {
  std::vector<double> iterates;  // extremal iterates, recurrence taken with equality
  std::vector<double> bound;
  std::vector<std::size_t> violations;  // t with iterates[t] > bound[t] + kBoundTolerance
};

/// eps_{t+1} = eps_t + k t against eps_t <= k t^2/2 + eps_0, t = 0 .. T.
RecurrenceCheck recurrence_oracle_quadratic(double k, double eps0, std::size_t horizon);

/// eps_{t+1} = A eps_t + k t against eps_t <= k t (A^t - 1)/(A - 1) + eps_0.
/// Requires A != 1. For A > 1 and eps0 > 0 the eps_0 term is too small (the
/// iterates carry A^t eps_0) and violations are reported, not hidden.
RecurrenceCheck recurrence_oracle_geometric(double a, double k, double eps0,
                                            std::size_t horizon);

/// k t (A^t - 1)/(A - 1) + eps0; the A -> 1 limit k t^2 + eps0 is not used.
double geometric_bound(double a, double k, double eps0, double t);

/// Linear envelope k t / (1 - A) + eps0 for the contractive case A < 1.
double contractive_bound(double a, double k, double eps0, double t);

/// E |s_t - s_0|^2 over the ensemble, t = 0 .. T.
std::vector<double> msd(const Ensemble& ens);

struct ExponentFit {
  double slope = 0.0;
  double standard_error = 0.0;
};

/// Least-squares slope of log msd against log t for integer t in [t_lo, t_hi].
ExponentFit msd_exponent(const std::vector<double>& series, std::size_t t_lo, std::size_t t_hi);

enum class BinSpacing { linear, log };

/// Histogram of |s_t| as a d-dimensional radial density on [0, r_max].
/// Log spacing uses edges {0, r_min, ..., r_max} with geometric steps above r_min.
/// Samples beyond r_max are excluded and reported in mass_outside.
RadialDensity radial_histogram(const Ensemble& ens, std::size_t t, std::size_t n_bins,
                               double r_max, BinSpacing spacing = BinSpacing::linear,
                               double r_min = 0.0);

/// Same, from an explicit list of radii.
RadialDensity radial_histogram(const std::vector<double>& radii, int dim, std::size_t n_bins,
                               double r_max, BinSpacing spacing = BinSpacing::linear,
                               double r_min = 0.0);

struct TailFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  int n_points = 0;
};

/// Minimum samples for an empirical shell to enter a tail fit.
inline constexpr long long kMinTailCount = 10;

/// Log-log least-squares slope of density against shell center over shells
/// whose center lies in [r_lo, r_hi]. Empty shells and, for empirical
/// densities, shells with fewer than kMinTailCount samples are skipped.
TailFit tail_exponent(const RadialDensity& density, double r_lo, double r_hi);

struct PassageRate {
  double rate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t passed = 0;
  std::size_t total = 0;
};

/// Wilson score interval at 95%.
PassageRate wilson_interval(std::size_t successes, std::size_t total);

/// Fraction of trajectories with some state at x_0 > target_x.
PassageRate passage_rate(const Ensemble& ens, const HallwaySpec& hallway, double target_x);

struct SwitchWindow {
  long long n_min = 0;  // ceil(2 Delta / delta): reach distance Delta ballistically
  long long n_max = 0;  // floor(factor / L_pi): stay within the linear regime
  bool feasible = false;
};

/// Default operational value of "much less than".
inline constexpr double kMuchLessFactor = 0.1;

SwitchWindow switch_step_heuristic(double lipschitz_policy, double distance, double delta,
                                   double much_less = kMuchLessFactor);

nlohmann::json to_json(const BallisticReport& report);

}  // namespace polexp
