#pragma once

// Radial Fokker-Planck model of per-step resampled policies.
//
// The random walk s_{t+1} = s_t + a_t with a_t ~ N(0, Sigma(s_t) I) has, in the
// small-action limit, the density equation
//     dp/dt = 1/2 laplacian(Sigma p),   Sigma(r) = sigma_b^2 + kappa sigma_w^2 r^2
// with kappa = 1/pi or 1 (DiffusionConvention). Two stationary candidates are
// provided:
//   half_dim_power   f(r) = Sigma(r)^(-d/2), tail r^-d
//   zero_flux        f(r) = Sigma(r)^(-1),   tail r^-2 (Sigma f constant)
// They coincide for d = 2. Only zero_flux annihilates the stationary operator
// for every d; half_dim_power leaves a residual
//     -kappa sigma_w^2 d (d - 2) sigma_b^2 Sigma^(-d/2 - 1).
// Neither is normalizable on all of R^d, so everything lives on a ball of
// radius R with a reflecting boundary.

#include <functional>
#include <vector>

#include "polexp/nngp.hpp"
#include "polexp/radial_density.hpp"

namespace polexp {

enum class StationaryForm { half_dim_power, zero_flux };

struct FPConfig {
  int dim = 2;
  double sigma_w2 = 1.0;
  double sigma_b2 = 1.0;
  DiffusionConvention convention = DiffusionConvention::pi_scaled;
  double radius = 10.0;
  int n_cells = 128;
  double dt = 1e-4;

  double diffusion(double r) const;
  double cell_width() const { return radius / n_cells; }
  /// Largest dt the explicit scheme accepts: 0.4 dr^2 / max Sigma.
  double max_stable_dt() const;
  void validate() const;
};

/// Unnormalized stationary profile at r.
double stationary_profile(StationaryForm form, const FPConfig& cfg, double r);

/// Profile evaluated at the cell centers of cfg's grid, normalized on [0, R].
/// Throws InvalidArgument when sigma_b2 = 0 (not normalizable at the origin).
RadialDensity stationary_closed_form(StationaryForm form, const FPConfig& cfg);

/// Radial Laplacian of Sigma(r) f(r) for a closed form, evaluated analytically.
double stationarity_residual(StationaryForm form, const FPConfig& cfg, double r);

/// u'' + (d - 1)/r u' by five-point central differences with step 1e-4 r.
double radial_laplacian_fd(const std::function<double(double)>& u, int dim, double r);

/// Uniform cell grid [0, R] with the given values (zeros if empty).
RadialDensity make_grid_density(const FPConfig& cfg, DensityForm form);

/// Narrow Gaussian of per-coordinate variance `variance`, evaluated at cell centers
/// and normalized on the grid.
RadialDensity gaussian_density(const FPConfig& cfg, double variance);

struct EvolveOptions {
  std::size_t n_steps = 1000;
  std::size_t snapshot_every = 0;  // 0: only the final state
};

/// Conservative explicit finite-volume update of
///   dp/dt = 1/2 r^(1-d) d/dr [ r^(d-1) d/dr (Sigma p) ]
/// with zero flux at r = 0 and r = R. Returns the snapshots, the last one being
/// the final state. Throws InvalidArgument if cfg.dt exceeds max_stable_dt().
std::vector<RadialDensity> evolve_radial(const FPConfig& cfg, const RadialDensity& p0,
                                         const EvolveOptions& options);

/// sum_i |a_i - b_i| * shell_volume(i). Throws DimensionError on grid mismatch.
double compare_l1(const RadialDensity& a, const RadialDensity& b);

const char* to_string(StationaryForm f);

}  // namespace polexp
