#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polexp/analysis.hpp"
#include "polexp/error.hpp"
#include "polexp/fokker_planck.hpp"
#include "polexp/rollout.hpp"

using namespace polexp;
using std::numbers::pi;

namespace {

double second_moment(const RadialDensity& d) {
  const auto c = d.centers();
  const auto v = d.shell_volumes();
  double m = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) m += d.values[i] * v[i] * c[i] * c[i];
  return m;
}

FPConfig config(int dim, double w2, double b2, double radius = 10.0, int cells = 128) {
  FPConfig cfg;
  cfg.dim = dim;
  cfg.sigma_w2 = w2;
  cfg.sigma_b2 = b2;
  cfg.radius = radius;
  cfg.n_cells = cells;
  cfg.dt = 0.9 * cfg.max_stable_dt();
  return cfg;
}

}  // namespace

TEST_CASE("closed form examples") {
  const auto cfg = config(2, pi, 1.0);
  CHECK(stationary_profile(StationaryForm::half_dim_power, cfg, 1.0) /
            stationary_profile(StationaryForm::half_dim_power, cfg, 0.0) ==
        doctest::Approx(0.5).epsilon(1e-15));

  const auto a = stationary_closed_form(StationaryForm::half_dim_power, cfg);
  const auto b = stationary_closed_form(StationaryForm::zero_flux, cfg);
  CHECK(a.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(compare_l1(a, b) < 1e-14);
  CHECK(a.form == DensityForm::half_dim_power);
  CHECK(b.form == DensityForm::zero_flux);

  CHECK_THROWS_AS(stationary_closed_form(StationaryForm::zero_flux, config(2, 1.0, 0.0)),
                  InvalidArgument);
}

TEST_CASE("the half-dim power form decays like r^-d") {
  for (int d : {2, 3, 4}) {
    const auto cfg = config(d, pi, 1.0, 2000.0, 256);
    const auto density = stationary_closed_form(StationaryForm::half_dim_power, cfg);
    // Crossover radius sqrt(sigma_b^2 pi / sigma_w^2) = 1.
    const auto fit = tail_exponent(density, 10.0, cfg.radius);
    CHECK(fit.slope == doctest::Approx(-d).epsilon(0.05 / d));
    const auto flux = stationary_closed_form(StationaryForm::zero_flux, cfg);
    CHECK(tail_exponent(flux, 10.0, cfg.radius).slope == doctest::Approx(-2.0).epsilon(0.025));
  }
}

TEST_CASE("stationarity residuals") {
  for (int d : {1, 2, 3, 5}) {
    const auto cfg = config(d, 0.7, 0.4);
    for (double r : {0.01, 0.5, 1.0, 3.0, 9.0}) {
      CHECK(std::abs(stationarity_residual(StationaryForm::zero_flux, cfg, r)) < 1e-8);
      auto u = [&](double x) {
        return cfg.diffusion(x) * stationary_profile(StationaryForm::zero_flux, cfg, x);
      };
      // Differencing a constant leaves roundoff of order 30 eps / (1e-4 r)^2.
      const double h = 1e-4 * r;
      CHECK(std::abs(radial_laplacian_fd(u, d, r)) < 100.0 * 2.3e-16 / (h * h));
    }
  }
  const auto d2 = config(2, 0.7, 0.4);
  for (double r : {0.1, 1.0, 5.0})
    CHECK(std::abs(stationarity_residual(StationaryForm::half_dim_power, d2, r)) < 1e-8);
  for (int d : {3, 4, 6}) {
    FPConfig free = config(d, 0.7, 0.0);
    // Small r makes Sigma^(m-2) huge; the residual must still vanish exactly.
    for (double r : {1e-3, 0.025, 0.3, 1.0, 4.0})
      CHECK(stationarity_residual(StationaryForm::half_dim_power, free, r) == 0.0);
  }
}

TEST_CASE("half-dim power residual matches its closed form and the finite differences") {
  for (int d : {3, 4, 5}) {
    const auto cfg = config(d, 1.3, 0.6);
    const double kappa_w = cfg.sigma_w2 / pi;
    for (double r : {0.2, 0.7, 1.5, 4.0}) {
      const double analytic = stationarity_residual(StationaryForm::half_dim_power, cfg, r);
      const double expected =
          -kappa_w * d * (d - 2) * cfg.sigma_b2 * std::pow(cfg.diffusion(r), -0.5 * d - 1.0);
      CHECK(analytic == doctest::Approx(expected).epsilon(1e-12));
      auto u = [&](double x) {
        return cfg.diffusion(x) * stationary_profile(StationaryForm::half_dim_power, cfg, x);
      };
      CHECK(radial_laplacian_fd(u, d, r) == doctest::Approx(analytic).epsilon(1e-6));
      CHECK(analytic < 0.0);
    }
  }
}

TEST_CASE("evolution conserves mass and stays nonnegative") {
  for (int d : {1, 2, 3}) {
    const auto cfg = config(d, 1.0, 0.5);
    const auto p0 = gaussian_density(cfg, 0.5);
    const auto snaps = evolve_radial(cfg, p0, {1000, 250});
    REQUIRE(snaps.size() == 4);
    for (const auto& s : snaps) {
      CHECK(std::abs(s.mass() - 1.0) < 1e-12);
      for (double v : s.values) CHECK(v >= 0.0);
      CHECK(s.form == DensityForm::numeric);
    }
    CHECK(snaps.back().time == doctest::Approx(1000 * cfg.dt));
  }
}

TEST_CASE("evolution preconditions") {
  auto cfg = config(2, 1.0, 1.0);
  const auto p0 = gaussian_density(cfg, 1.0);
  cfg.dt = 2.0 * cfg.max_stable_dt();
  CHECK_THROWS_AS(evolve_radial(cfg, p0, {}), InvalidArgument);
  const auto other = config(2, 1.0, 1.0, 10.0, 64);
  CHECK_THROWS_AS(evolve_radial(other, p0, {}), DimensionError);
  FPConfig coarse = cfg;
  coarse.n_cells = 16;
  CHECK_THROWS_AS(coarse.validate(), InvalidArgument);
}

TEST_CASE("constant diffusion spreads a bump at rate d Sigma") {
  for (int d : {2, 3}) {
    const auto cfg = config(d, 0.0, 1.0, 20.0, 256);
    const auto p0 = gaussian_density(cfg, 0.25);
    const auto steps = static_cast<std::size_t>(std::ceil(2.0 / cfg.dt));
    const auto snaps = evolve_radial(cfg, p0, {steps, steps / 10});
    std::vector<double> t, m;
    for (const auto& s : snaps) {
      t.push_back(s.time);
      m.push_back(second_moment(s));
    }
    const double rate = (m.back() - m.front()) / (t.back() - t.front());
    CHECK(rate == doctest::Approx(d * 1.0).epsilon(0.05));
  }
}

TEST_CASE("the long-time state is a fixed point") {
  const auto cfg = config(2, pi, 1.0, 10.0, 64);
  auto p = gaussian_density(cfg, 1.0);
  const auto unit = static_cast<std::size_t>(1.0 / cfg.dt);
  for (int i = 0; i < 40; ++i) p = evolve_radial(cfg, p, {unit, 0}).back();
  const auto next = evolve_radial(cfg, p, {unit, 0}).back();
  CHECK(compare_l1(p, next) < 1e-6);
  const auto closed = stationary_closed_form(StationaryForm::zero_flux, cfg);
  CHECK(compare_l1(p, closed) < 1e-2);
}

TEST_CASE("compare_l1") {
  const auto cfg = config(2, 1.0, 1.0, 10.0, 64);
  const auto a = gaussian_density(cfg, 1.0);
  CHECK(compare_l1(a, a) == 0.0);

  auto left = make_grid_density(cfg, DensityForm::numeric);
  auto right = left;
  left.values[0] = 1.0;
  right.values[63] = 1.0;
  left.normalize();
  right.normalize();
  CHECK(compare_l1(left, right) == doctest::Approx(2.0).epsilon(1e-12));

  auto bumped = a;
  for (std::size_t i = 0; i < bumped.size(); ++i) bumped.values[i] *= (i < 10 ? 1.01 : 0.99);
  bumped.normalize();
  const double l1 = compare_l1(a, bumped);
  CHECK(l1 > 0.005);
  CHECK(l1 < 0.02);

  CHECK_THROWS_AS(compare_l1(a, gaussian_density(config(2, 1.0, 1.0, 10.0, 32), 1.0)),
                  DimensionError);
}

TEST_CASE("small-noise gp ensembles are closer to the numeric solution than to a gaussian") {
  // Per-step GP walk with sigma_w^2 = sigma_b^2 = 0.01 from the origin,
  // compared at step T with the radial equation started from the walk's own
  // variance at t0.
  const std::size_t t0 = 20;
  const std::size_t horizon = 1500;
  EnsembleConfig ec;
  ec.mode.kind = RolloutKind::per_step_gp;
  ec.kernel = {KernelFamily::relu_arccos, 0.01, 0.01, 1.0};
  const auto ens = run_ensemble(ec, EnvSpec{}, Vector::Zero(2), horizon, 4000, 17);

  auto cfg = config(2, 0.01, 0.01, 40.0, 128);
  const auto start = gaussian_density(cfg, 0.01 * t0);
  const auto steps = static_cast<std::size_t>(std::ceil((horizon - t0) / cfg.dt));
  cfg.dt = static_cast<double>(horizon - t0) / static_cast<double>(steps);
  const auto numeric = evolve_radial(cfg, start, {steps, 0}).back();

  const auto empirical = radial_histogram(ens, horizon, 128, cfg.radius);
  const double mean_sq = msd(ens)[horizon];
  const auto gauss = gaussian_density(cfg, mean_sq / 2.0);
  const double to_numeric = compare_l1(empirical, numeric);
  const double to_gauss = compare_l1(empirical, gauss);
  MESSAGE("L1 to numeric " << to_numeric << ", to gaussian " << to_gauss);
  CHECK(to_numeric < to_gauss);
}
