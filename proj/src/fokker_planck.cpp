#include "polexp/fokker_planck.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "polexp/error.hpp"

namespace polexp {
namespace {

double kappa(DiffusionConvention c) {
  return c == DiffusionConvention::pi_scaled ? 1.0 / std::numbers::pi : 1.0;
}

double exponent(StationaryForm form, int dim) {
  return form == StationaryForm::half_dim_power ? -0.5 * dim : -1.0;
}

}  // namespace

double FPConfig::diffusion(double r) const {
  return sigma_b2 + kappa(convention) * sigma_w2 * r * r;
}

double FPConfig::max_stable_dt() const {
  const double dr = cell_width();
  return 0.4 * dr * dr / diffusion(radius);
}

void FPConfig::validate() const {
  if (dim < 1) throw InvalidArgument("fp: dim must be >= 1");
  if (!(sigma_w2 >= 0.0) || !(sigma_b2 >= 0.0))
    throw InvalidArgument("fp: variances must be >= 0");
  if (!(sigma_w2 > 0.0 || sigma_b2 > 0.0)) throw InvalidArgument("fp: zero diffusion everywhere");
  if (!(radius > 0.0)) throw InvalidArgument("fp: radius must be > 0");
  if (n_cells < 32) throw InvalidArgument("fp: n_cells must be >= 32");
  if (!(dt > 0.0)) throw InvalidArgument("fp: dt must be > 0");
}

double stationary_profile(StationaryForm form, const FPConfig& cfg, double r) {
  return std::pow(cfg.diffusion(r), exponent(form, cfg.dim));
}

RadialDensity make_grid_density(const FPConfig& cfg, DensityForm form) {
  RadialDensity density;
  density.dim = cfg.dim;
  density.form = form;
  density.edges.resize(static_cast<std::size_t>(cfg.n_cells) + 1);
  for (int i = 0; i <= cfg.n_cells; ++i)
    density.edges[static_cast<std::size_t>(i)] = cfg.radius * i / cfg.n_cells;
  density.values.assign(static_cast<std::size_t>(cfg.n_cells), 0.0);
  return density;
}

RadialDensity stationary_closed_form(StationaryForm form, const FPConfig& cfg) {
  cfg.validate();
  if (!(cfg.sigma_b2 > 0.0))
    throw InvalidArgument("stationary_closed_form: sigma_b2 = 0 is not normalizable at r = 0");
  auto density = make_grid_density(
      cfg, form == StationaryForm::zero_flux ? DensityForm::zero_flux : DensityForm::half_dim_power);
  const auto centers = density.centers();
  for (std::size_t i = 0; i < centers.size(); ++i)
    density.values[i] = stationary_profile(form, cfg, centers[i]);
  density.normalize();
  return density;
}

double stationarity_residual(StationaryForm form, const FPConfig& cfg, double r) {
  // u = Sigma^m with Sigma = b + c r^2, so
  // u'' + (d-1)/r u' = m Sigma^(m-2) [c^2 r^2 (4 (m - 1) + 2 d) + 2 c d b].
  // The r^2 coefficient is formed first: it is exactly 0 for m = 1 - d/2,
  // which avoids cancelling two large terms near r = 0 when b = 0.
  const double m = 1.0 + exponent(form, cfg.dim);
  if (m == 0.0) return 0.0;
  const double c = kappa(cfg.convention) * cfg.sigma_w2;
  const double sigma = cfg.diffusion(r);
  const double r2_coeff = 4.0 * (m - 1.0) + 2.0 * cfg.dim;
  return m * std::pow(sigma, m - 2.0) *
         (c * c * r * r * r2_coeff + 2.0 * c * cfg.dim * cfg.sigma_b2);
}

double radial_laplacian_fd(const std::function<double(double)>& u, int dim, double r) {
  const double h = 1e-4 * r;
  const double up2 = u(r + 2 * h);
  const double up1 = u(r + h);
  const double u0 = u(r);
  const double um1 = u(r - h);
  const double um2 = u(r - 2 * h);
  const double d1 = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * h);
  const double d2 = (-up2 + 16.0 * up1 - 30.0 * u0 + 16.0 * um1 - um2) / (12.0 * h * h);
  return d2 + (dim - 1.0) / r * d1;
}

RadialDensity gaussian_density(const FPConfig& cfg, double variance) {
  if (!(variance > 0.0)) throw InvalidArgument("gaussian_density: variance must be > 0");
  auto density = make_grid_density(cfg, DensityForm::gaussian);
  const auto centers = density.centers();
  for (std::size_t i = 0; i < centers.size(); ++i)
    density.values[i] = std::exp(-centers[i] * centers[i] / (2.0 * variance));
  density.normalize();
  return density;
}

std::vector<RadialDensity> evolve_radial(const FPConfig& cfg, const RadialDensity& p0,
                                         const EvolveOptions& options) {
  cfg.validate();
  if (cfg.dt > cfg.max_stable_dt())
    throw InvalidArgument("evolve_radial: dt = " + std::to_string(cfg.dt) +
                          " exceeds the stability limit " + std::to_string(cfg.max_stable_dt()));
  const auto n = static_cast<std::size_t>(cfg.n_cells);
  if (p0.size() != n || p0.dim != cfg.dim)
    throw DimensionError("evolve_radial: initial density is not on the config grid");

  auto state = make_grid_density(cfg, DensityForm::numeric);
  state.time = p0.time;
  const auto centers = state.centers();
  const auto volumes = state.shell_volumes();
  const double dr = cfg.cell_width();
  const double area = unit_sphere_area(cfg.dim);

  std::vector<double> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = cfg.diffusion(centers[i]);
  // Transfer coefficient across the face between cells i and i + 1.
  std::vector<double> face(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    face[i] = 0.5 * area * std::pow(state.edges[i + 1], cfg.dim - 1) / dr * cfg.dt;

  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) mass[i] = p0.values[i] * volumes[i];
  std::vector<double> u(n);
  std::vector<double> flux(n - 1);

  std::vector<RadialDensity> snapshots;
  bool warned = false;
  auto snapshot = [&](std::size_t steps_done) {
    for (std::size_t i = 0; i < n; ++i) state.values[i] = mass[i] / volumes[i];
    state.time = p0.time + static_cast<double>(steps_done) * cfg.dt;
    snapshots.push_back(state);
  };

  for (std::size_t s = 1; s <= options.n_steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) u[i] = sigma[i] * mass[i] / volumes[i];
    for (std::size_t i = 0; i + 1 < n; ++i) flux[i] = face[i] * (u[i + 1] - u[i]);
    // Zero flux through r = 0 and r = R.
    mass[0] += flux[0];
    for (std::size_t i = 1; i + 1 < n; ++i) mass[i] += flux[i] - flux[i - 1];
    mass[n - 1] -= flux[n - 2];
    for (std::size_t i = 0; i < n; ++i) {
      if (mass[i] < -1e-14 * volumes[i]) {
        if (!warned) {
          std::cerr << "evolve_radial: negative density clipped at t = "
                    << static_cast<double>(s) * cfg.dt << "\n";
          warned = true;
        }
        mass[i] = 0.0;
      }
    }
    if (options.snapshot_every > 0 && s % options.snapshot_every == 0 && s != options.n_steps)
      snapshot(s);
  }
  snapshot(options.n_steps);
  return snapshots;
}

double compare_l1(const RadialDensity& a, const RadialDensity& b) {
  if (a.dim != b.dim || a.edges != b.edges)
    throw DimensionError("compare_l1: densities live on different grids");
  const auto volumes = a.shell_volumes();
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a.values[i] - b.values[i]) * volumes[i];
  return total;
}

const char* to_string(StationaryForm f) {
  return f == StationaryForm::zero_flux ? "zero_flux" : "half_dim_power";
}

}  // namespace polexp
