#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "polexp/error.hpp"
#include "polexp/nngp.hpp"
#include "polexp/rng.hpp"

using namespace polexp;
using std::numbers::pi;

namespace {

Vector v2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Vector random_vector(Rng& rng, int dim, double scale = 1.0) {
  Vector v(dim);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

const KernelSpec kUnitRelu{KernelFamily::relu_arccos, 1.0, 0.0, 1.0};

}  // namespace

TEST_CASE("relu kernel examples") {
  CHECK(kernel(kUnitRelu, v2(1, 0), v2(1, 0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kernel(kUnitRelu, v2(1, 0), v2(0, 1)) == doctest::Approx(1.0 / pi).epsilon(1e-14));
  const KernelSpec biased{KernelFamily::relu_arccos, 1.0, 0.25, 1.0};
  CHECK(kernel(biased, v2(1, 0), v2(-1, 0)) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("relu kernel at a zero input is the bias variance") {
  const KernelSpec spec{KernelFamily::relu_arccos, 2.0, 0.3, 1.0};
  CHECK(kernel(spec, v2(0, 0), v2(1, 2)) == 0.3);
  CHECK(kernel(spec, v2(0, 0), v2(0, 0)) == 0.3);
}

TEST_CASE("kernel dimension mismatch throws") {
  CHECK_THROWS_AS(kernel(kUnitRelu, v2(1, 0), Vector::Ones(3)), DimensionError);
}

TEST_CASE("nearly parallel inputs do not produce NaN") {
  const Vector s = v2(0.1, 0.3);
  const Vector s2 = 3.0 * s;
  const double k = kernel(kUnitRelu, s, s2);
  CHECK(std::isfinite(k));
  CHECK(k == doctest::Approx(3.0 * s.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("diffusion coefficient examples") {
  const KernelSpec spec{KernelFamily::relu_arccos, pi, 1.0, 1.0};
  CHECK(diffusion_coefficient(spec, DiffusionConvention::pi_scaled, v2(1, 0)) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(diffusion_coefficient(spec, DiffusionConvention::pi_scaled, v2(0, 0)) == 1.0);
  const Vector s = v2(0, 2);
  CHECK(diffusion_coefficient(kUnitRelu, DiffusionConvention::kernel_diagonal, s) == 4.0);
  CHECK(diffusion_coefficient(kUnitRelu, DiffusionConvention::kernel_diagonal, s) ==
        doctest::Approx(kernel(kUnitRelu, s, s)).epsilon(1e-12));
  const KernelSpec rbf{KernelFamily::rbf, 0.5, 0.25, 2.0};
  CHECK(diffusion_coefficient(rbf, DiffusionConvention::pi_scaled, v2(7, 1)) == 0.75);
}

TEST_CASE("kernel symmetry, homogeneity and Cauchy-Schwarz") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector s = random_vector(rng, 3);
    const Vector s2 = random_vector(rng, 3);
    CHECK(kernel(kUnitRelu, s, s2) == kernel(kUnitRelu, s2, s));
    const double a = 0.1 + 5.0 * rng.uniform();
    const double b = 0.1 + 5.0 * rng.uniform();
    const double base = kernel(kUnitRelu, s, s2);
    CHECK(kernel(kUnitRelu, a * s, b * s2) == doctest::Approx(a * b * base).epsilon(1e-12));
    const double kss = kernel(kUnitRelu, s, s);
    const double k22 = kernel(kUnitRelu, s2, s2);
    CHECK(base * base <= kss * k22 * (1.0 + 1e-12));
  }
}

TEST_CASE("rbf is shift invariant, relu is not") {
  const KernelSpec rbf{KernelFamily::rbf, 1.3, 0.1, 0.7};
  Rng rng(8);
  const Vector s = random_vector(rng, 2);
  const Vector s2 = random_vector(rng, 2);
  const double base = kernel(rbf, s, s2);
  for (int i = 0; i < 20; ++i) {
    const Vector v = random_vector(rng, 2, 3.0);
    CHECK(kernel(rbf, s + v, s2 + v) == doctest::Approx(base).epsilon(1e-12));
  }
  const Vector v = v2(0.5, -0.25);
  CHECK(std::abs(kernel(kUnitRelu, s + v, s2 + v) - kernel(kUnitRelu, s, s2)) > 1e-6);
}

TEST_CASE("kernel matrix examples") {
  Matrix one(1, 2);
  one << 1.0, 0.0;
  const Matrix k1 = kernel_matrix(kUnitRelu, one, 0.0);
  REQUIRE(k1.rows() == 1);
  CHECK(k1(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

  Matrix dup(2, 2);
  dup << 0.3, 0.4, 0.3, 0.4;
  const Matrix k2 = kernel_matrix(kUnitRelu, dup, 1e-8);
  Eigen::LLT<Matrix> llt(k2);
  CHECK(llt.info() == Eigen::Success);

  CHECK_THROWS_AS(kernel_matrix(kUnitRelu, Matrix(0, 2)), InvalidArgument);
}

TEST_CASE("random kernel matrices are symmetric PSD") {
  Rng rng(13);
  Matrix states(20, 3);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = rng.normal();
  for (const auto& spec : {kUnitRelu, KernelSpec{KernelFamily::relu_arccos, 2.0, 0.5, 1.0},
                           KernelSpec{KernelFamily::rbf, 1.0, 0.0, 0.8}}) {
    const Matrix k = kernel_matrix(spec, states);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("cholesky jitter escalation") {
  Matrix singular = Matrix::Ones(3, 3);
  const auto chol = cholesky_with_jitter(singular);
  CHECK(chol.added_jitter > 0.0);
  CHECK(chol.added_jitter <= 1e-10 * 256);

  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  try {
    cholesky_with_jitter(indefinite);
    FAIL("expected a factorization error");
  } catch (const FactorizationError& e) {
    CHECK(e.final_jitter() == doctest::Approx(1e-10 * 256));
  }
}

TEST_CASE("gp samples have the kernel variance and correlation") {
  Matrix states(2, 2);
  states << 1.0, 0.0, 0.0, 1.0;
  const int n = 100'000;
  double s11 = 0.0, s22 = 0.0, s12 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Matrix a = gp_sample_actions(kUnitRelu, states, 1, split_seed(99, i));
    s11 += a(0, 0) * a(0, 0);
    s22 += a(1, 0) * a(1, 0);
    s12 += a(0, 0) * a(1, 0);
  }
  CHECK(s11 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(s12 / std::sqrt(s11 * s22) - 1.0 / pi) < 0.02);
}

TEST_CASE("zero covariance gives exactly zero actions") {
  const KernelSpec spec{KernelFamily::relu_arccos, 0.0, 0.0, 1.0};
  Matrix states(3, 2);
  states << 1, 2, 3, 4, 5, 6;
  CHECK(gp_sample_actions(spec, states, 2, 1).isZero(0.0));
}

TEST_CASE("gp sample columns are independent draws") {
  Matrix states(1, 2);
  states << 1.0, 1.0;
  const Matrix a = gp_sample_actions(kUnitRelu, states, 4, 3);
  CHECK(a.cols() == 4);
  CHECK(a(0, 0) != a(0, 1));
}

TEST_CASE("monte carlo covariance matches the kernel") {
  const Architecture arch{2, {512}, 1, Activation::relu};
  const InitScheme init{InitKind::gaussian, 1.0, 0.0};
  const double same = mc_covariance(arch, init, v2(1, 0), v2(1, 0), 4000, 1);
  CHECK(same == doctest::Approx(1.0).epsilon(0.08));

  const InitScheme biased{InitKind::gaussian, 1.0, 0.5};
  const double anti = mc_covariance(arch, biased, v2(1, 0), v2(-1, 0), 4000, 2);
  // Standard error of the covariance of two weakly coupled outputs is about
  // sqrt(K(s,s) K(s2,s2) / n).
  CHECK(std::abs(anti - 0.25) < 3.0 * 1.25 / std::sqrt(4000.0));
}

TEST_CASE("finite-width error shrinks with width") {
  const InitScheme init{InitKind::gaussian, 1.0, 0.0};
  const Vector s = v2(1, 0);
  const Vector s2 = v2(0.6, 0.8);
  const double exact = kernel(kUnitRelu, s, s2);
  double errors[3];
  const int widths[3] = {64, 256, 1024};
  for (int w = 0; w < 3; ++w) {
    double total = 0.0;
    for (int rep = 0; rep < 3; ++rep)
      total += std::abs(mc_covariance({2, {widths[w]}, 1, Activation::relu}, init, s, s2, 3000,
                                      split_seed(w, rep)) -
                        exact);
    errors[w] = total / 3.0;
  }
  // The readout makes the covariance exact in expectation at every width, so
  // the trend is flat within Monte Carlo noise: no width is markedly worse.
  const double noise = 3.0 * exact / std::sqrt(3000.0);
  CHECK(errors[1] <= errors[0] + noise);
  CHECK(errors[2] <= errors[1] + noise);
}
