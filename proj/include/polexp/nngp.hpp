#pragma once

// Infinite-width kernels, the diffusion coefficient of per-step resampled
// policies, exact GP action sampling, and Monte Carlo covariance of finite nets.

#include <cstdint>
#include <vector>

#include "polexp/policy.hpp"

namespace polexp {

enum class KernelFamily { relu_arccos, rbf };

struct KernelSpec {
  KernelFamily family = KernelFamily::relu_arccos;
  double sigma_w2 = 1.0;
  double sigma_b2 = 0.0;
  double rbf_lengthscale = 1.0;

  void validate() const;
};

/// Which diagonal to use as the per-step action variance Sigma(s).
///   pi_scaled        Sigma(s) = sigma_b^2 + sigma_w^2 |s|^2 / pi
///   kernel_diagonal  Sigma(s) = K(s, s) = sigma_b^2 + sigma_w^2 |s|^2
/// The two differ by a factor pi on the quadratic term; pi_scaled is the
/// default and is the form the stationary-density analysis is written in.
enum class DiffusionConvention { pi_scaled, kernel_diagonal };

/// ReLU arc-cosine kernel or RBF. For relu_arccos a zero input makes the
/// angular term vanish, so K(0, s) = sigma_b^2.
double kernel(const KernelSpec& spec, const VectorRef& s, const VectorRef& s2);

/// Per-step action variance at s. RBF ignores `convention` and returns
/// sigma_w^2 + sigma_b^2.
double diffusion_coefficient(const KernelSpec& spec, DiffusionConvention convention,
                             const VectorRef& s);

/// K(s_i, s_j) + jitter [i == j] over the rows of `states`.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& states, double jitter = 0.0);

struct CholeskyResult {
  Matrix lower;
  double added_jitter = 0.0;  // on top of whatever the input already carried
};

/// Cholesky with jitter escalation: plain first, then 1e-10 doubled up to 8
/// times. Throws FactorizationError carrying the last jitter tried.
CholeskyResult cholesky_with_jitter(const Matrix& k);

/// One draw of a GP policy at the rows of `states`: an |states| x action_dim
/// matrix whose columns are i.i.d. N(0, K).
Matrix gp_sample_actions(const KernelSpec& spec, const Matrix& states, int action_dim,
                         std::uint64_t seed);

/// Unbiased sample covariance of pi(s)_0 and pi(s2)_0 over `n_draws`
/// independently sampled finite networks.
double mc_covariance(const Architecture& arch, const InitScheme& init, const VectorRef& s,
                     const VectorRef& s2, int n_draws, std::uint64_t seed);

const char* to_string(KernelFamily f);
const char* to_string(DiffusionConvention c);

}  // namespace polexp
