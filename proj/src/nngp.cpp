#include "polexp/nngp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "polexp/error.hpp"
#include "polexp/rng.hpp"

namespace polexp {

void KernelSpec::validate() const {
  if (!(sigma_w2 >= 0.0) || !std::isfinite(sigma_w2))
    throw InvalidArgument("kernel: sigma_w2 must be finite and >= 0");
  if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2))
    throw InvalidArgument("kernel: sigma_b2 must be finite and >= 0");
  if (!(rbf_lengthscale > 0.0) || !std::isfinite(rbf_lengthscale))
    throw InvalidArgument("kernel: rbf_lengthscale must be finite and > 0");
}

double kernel(const KernelSpec& spec, const VectorRef& s, const VectorRef& s2) {
  if (s.size() != s2.size())
    throw DimensionError("kernel: inputs have dimensions " + std::to_string(s.size()) + " and " +
                         std::to_string(s2.size()));
  if (spec.family == KernelFamily::rbf) {
    const double sq = (s - s2).squaredNorm();
    return spec.sigma_w2 * std::exp(-sq / (2.0 * spec.rbf_lengthscale * spec.rbf_lengthscale)) +
           spec.sigma_b2;
  }
  const double n1 = s.norm();
  const double n2 = s2.norm();
  if (n1 == 0.0 || n2 == 0.0) return spec.sigma_b2;
  const double norms = n1 * n2;  // grouped so that K(s, s2) == K(s2, s) bitwise
  const double cos_t = std::clamp(s.dot(s2) / norms, -1.0, 1.0);
  const double theta = std::acos(cos_t);
  const double angular = std::sin(theta) + (std::numbers::pi - theta) * cos_t;
  return spec.sigma_w2 / std::numbers::pi * norms * angular + spec.sigma_b2;
}

double diffusion_coefficient(const KernelSpec& spec, DiffusionConvention convention,
                             const VectorRef& s) {
  if (spec.family == KernelFamily::rbf) return spec.sigma_w2 + spec.sigma_b2;
  const double quad = spec.sigma_w2 * s.squaredNorm();
  return convention == DiffusionConvention::pi_scaled ? spec.sigma_b2 + quad / std::numbers::pi
                                                      : spec.sigma_b2 + quad;
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& states, double jitter) {
  spec.validate();
  if (states.rows() == 0) throw InvalidArgument("kernel_matrix: no states");
  if (!(jitter >= 0.0)) throw InvalidArgument("kernel_matrix: jitter must be >= 0");
  const auto n = states.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel(spec, states.row(i).transpose(), states.row(j).transpose());
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += jitter;
  }
  return k;
}

CholeskyResult cholesky_with_jitter(const Matrix& k) {
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  double jitter = 1e-10;
  constexpr int kDoublings = 8;
  for (int attempt = 0; attempt <= kDoublings; ++attempt) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    llt.compute(kj);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    if (attempt < kDoublings) jitter *= 2.0;
  }
  std::ostringstream msg;
  msg << "cholesky: factorization failed with jitter up to " << jitter;
  throw FactorizationError(msg.str(), jitter);
}

Matrix gp_sample_actions(const KernelSpec& spec, const Matrix& states, int action_dim,
                         std::uint64_t seed) {
  if (action_dim <= 0) throw InvalidArgument("gp_sample_actions: action_dim must be positive");
  const Matrix k = kernel_matrix(spec, states);
  const auto n = states.rows();
  // A zero covariance gives exactly zero actions; jitter would otherwise leak in.
  if (k.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(n, action_dim);
  const auto chol = cholesky_with_jitter(k);
  Rng rng(seed);
  Matrix z(n, action_dim);
  for (int c = 0; c < action_dim; ++c)
    for (Eigen::Index i = 0; i < n; ++i) z(i, c) = rng.normal();
  return chol.lower * z;
}

double mc_covariance(const Architecture& arch, const InitScheme& init, const VectorRef& s,
                     const VectorRef& s2, int n_draws, std::uint64_t seed) {
  if (n_draws < 2) throw InvalidArgument("mc_covariance: n_draws must be >= 2");
  double mean_x = 0.0;
  double mean_y = 0.0;
  double co_moment = 0.0;
  for (int k = 0; k < n_draws; ++k) {
    const auto net = sample_policy(arch, init, split_seed(seed, static_cast<std::uint64_t>(k)));
    const double x = forward(net, s)(0);
    const double y = forward(net, s2)(0);
    // Welford-style co-moment update.
    const double n = k + 1.0;
    const double dx = x - mean_x;
    mean_x += dx / n;
    mean_y += (y - mean_y) / n;
    co_moment += dx * (y - mean_y);
  }
  return co_moment / (n_draws - 1.0);
}

const char* to_string(KernelFamily f) { return f == KernelFamily::rbf ? "rbf" : "relu_arccos"; }

const char* to_string(DiffusionConvention c) {
  return c == DiffusionConvention::pi_scaled ? "pi_scaled" : "kernel_diagonal";
}

}  // namespace polexp
