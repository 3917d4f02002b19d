#pragma once

#include <optional>
#include <vector>

namespace polexp {

/// Where a density came from.
enum class DensityForm { half_dim_power, zero_flux, numeric, empirical, gaussian };

/// A radially symmetric density in d dimensions, piecewise constant on the
/// shells [edges[i], edges[i+1]). `values` are per unit d-volume, so the
/// probability of shell i is values[i] * shell_volume(i).
struct RadialDensity {
  std::vector<double> edges;
  std::vector<double> values;
  std::optional<std::vector<long long>> counts;  // samples per shell (empirical only)
  int dim = 2;
  DensityForm form = DensityForm::numeric;
  double time = 0.0;
  double mass_outside = 0.0;  // fraction of samples beyond the last edge (empirical only)

  std::size_t size() const noexcept { return values.size(); }
  double radius() const { return edges.back(); }
  /// Midpoint of linear shells; geometric mean when the inner edge is > 0 and
  /// the grid is log-spaced.
  std::vector<double> centers() const;
  std::vector<double> shell_volumes() const;
  /// sum_i values[i] * shell_volume(i).
  double mass() const;
  void normalize();
  bool log_spaced = false;
};

/// Surface area of the unit sphere in R^d.
double unit_sphere_area(int dim);

/// Volume of the shell r0 <= |x| < r1 in R^d.
double shell_volume(int dim, double r0, double r1);

const char* to_string(DensityForm f);

}  // namespace polexp
