#include "polexp/radial_density.hpp"

#include <cmath>
#include <numbers>

#include "polexp/error.hpp"

namespace polexp {

double unit_sphere_area(int dim) {
  const double half = 0.5 * dim;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

double shell_volume(int dim, double r0, double r1) {
  return unit_sphere_area(dim) / dim * (std::pow(r1, dim) - std::pow(r0, dim));
}

namespace {

std::size_t shell_count(const std::vector<double>& edges) {
  return edges.empty() ? 0 : edges.size() - 1;
}

}  // namespace

std::vector<double> RadialDensity::centers() const {
  std::vector<double> c(shell_count(edges));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double lo = edges[i];
    const double hi = edges[i + 1];
    c[i] = (log_spaced && lo > 0.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
  }
  return c;
}

std::vector<double> RadialDensity::shell_volumes() const {
  std::vector<double> v(shell_count(edges));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = shell_volume(dim, edges[i], edges[i + 1]);
  return v;
}

double RadialDensity::mass() const {
  const auto vol = shell_volumes();
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += values[i] * vol[i];
  return total;
}

void RadialDensity::normalize() {
  const double m = mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("radial density: cannot normalize zero mass");
  for (auto& v : values) v /= m;
}

const char* to_string(DensityForm f) {
  switch (f) {
    case DensityForm::half_dim_power: return "half_dim_power";
    case DensityForm::zero_flux: return "zero_flux";
    case DensityForm::numeric: return "numeric";
    case DensityForm::empirical: return "empirical";
    case DensityForm::gaussian: return "gaussian";
  }
  return "unknown";
}

}  // namespace polexp
