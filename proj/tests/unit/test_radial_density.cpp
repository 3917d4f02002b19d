#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polexp/error.hpp"
#include "polexp/radial_density.hpp"

using namespace polexp;
using std::numbers::pi;

TEST_CASE("unit sphere areas") {
  CHECK(unit_sphere_area(1) == doctest::Approx(2.0));
  CHECK(unit_sphere_area(2) == doctest::Approx(2.0 * pi));
  CHECK(unit_sphere_area(3) == doctest::Approx(4.0 * pi));
  CHECK(unit_sphere_area(4) == doctest::Approx(2.0 * pi * pi));
}

TEST_CASE("shell volumes add up to the ball") {
  for (int d = 1; d <= 5; ++d) {
    RadialDensity density;
    density.dim = d;
    for (int i = 0; i <= 10; ++i) density.edges.push_back(0.3 * i);
    density.values.assign(10, 1.0);
    double total = 0.0;
    for (double v : density.shell_volumes()) total += v;
    CHECK(total == doctest::Approx(shell_volume(d, 0.0, 3.0)).epsilon(1e-12));
  }
  CHECK(shell_volume(2, 0.0, 1.0) == doctest::Approx(pi));
}

TEST_CASE("normalize makes the shell integral one") {
  RadialDensity density;
  density.dim = 3;
  for (int i = 0; i <= 64; ++i) density.edges.push_back(0.1 * i);
  for (int i = 0; i < 64; ++i) density.values.push_back(std::exp(-0.1 * i));
  density.normalize();
  CHECK(density.mass() == doctest::Approx(1.0).epsilon(1e-12));
  RadialDensity empty = density;
  std::fill(empty.values.begin(), empty.values.end(), 0.0);
  CHECK_THROWS_AS(empty.normalize(), InvalidArgument);
}

TEST_CASE("centers are midpoints or geometric means") {
  RadialDensity density;
  density.edges = {0.0, 1.0, 4.0};
  density.values = {0.0, 0.0};
  CHECK(density.centers() == std::vector<double>{0.5, 2.5});
  density.log_spaced = true;
  CHECK(density.centers() == std::vector<double>{0.5, 2.0});
}
