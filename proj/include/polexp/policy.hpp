#pragma once

// Finite-width feedforward policies: construction, sampling, evaluation and
// Lipschitz certification.
//
// Initialization convention (Gaussian scheme):
//   input layer      W ~ N(0, sigma_w^2)
//   deeper layers    W ~ N(0, 2 / fan_in)        (variance preserving for ReLU)
//   hidden biases    0
//   readout bias     b ~ N(0, sigma_b^2)
// With one ReLU hidden layer this gives exactly
//   Cov[pi(s)_i, pi(s')_i] = sigma_w^2/pi |s||s'| (sin t + (pi - t) cos t) + sigma_b^2
// and for any depth the diagonal is sigma_w^2 |s|^2 + sigma_b^2.
// The Xavier-Glorot scheme draws every weight from N(0, 2 / (fan_in + fan_out))
// with the same bias placement.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace polexp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

enum class Activation { relu, tanh };
enum class InitKind { gaussian, xavier_glorot };

struct InitScheme {
  InitKind kind = InitKind::gaussian;
  double sigma_w = 1.0;
  double sigma_b = 0.0;

  void validate() const;
};

struct Architecture {
  int input_dim = 2;
  std::vector<int> hidden{256, 256};
  int output_dim = 2;
  Activation activation = Activation::relu;

  void validate() const;

  /// Two hidden layers of 256 ReLU units, the usual deep-RL policy MLP.
  static Architecture standard_mlp(int dim) { return {dim, {256, 256}, dim, Activation::relu}; }
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Immutable deterministic policy s -> a.
class PolicyNet {
 public:
  /// Throws DimensionError if the layer shapes do not chain through `arch`.
  PolicyNet(Architecture arch, std::vector<Layer> layers, std::uint64_t seed = 0);

  const Architecture& arch() const noexcept { return arch_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::uint64_t seed() const noexcept { return seed_; }

  Vector operator()(const VectorRef& s) const;

 private:
  Architecture arch_;
  std::vector<Layer> layers_;
  std::uint64_t seed_;
};

/// Draws every weight and bias i.i.d. per `init`. Same arguments, same bits.
PolicyNet sample_policy(const Architecture& arch, const InitScheme& init, std::uint64_t seed);

/// forward(net, s) with a dimension check.
Vector forward(const PolicyNet& net, const VectorRef& s);

/// Action of a freshly initialized network at the single state `s`.
///
/// Equal in distribution to forward(sample_policy(arch, init, seed), s), but
/// draws one Gaussian per unit instead of one per weight: given the layer
/// input x, every pre-activation w.x + b is an independent
/// N(0, v |x|^2 + var_b). Used wherever a network is evaluated exactly once.
Vector sample_forward(const Architecture& arch, const InitScheme& init, const VectorRef& s,
                      std::uint64_t seed);

/// Largest singular value by power iteration on W^T W. Stops when the relative
/// change drops below `rel_tol` after at least 50 iterations, or at 10^4.
double spectral_norm(const Matrix& w, std::uint64_t seed = 0, double rel_tol = 1e-6);

/// Product of the layer spectral norms (the activations are 1-Lipschitz).
double spectral_norm_product(const PolicyNet& net);

/// Safety factor applied on top of the power-iteration product.
inline constexpr double kLipschitzSafetyFactor = 1.01;

/// Certified global Lipschitz bound: kLipschitzSafetyFactor * spectral_norm_product.
double lipschitz_upper_bound(const PolicyNet& net);

/// Max of |pi(x) - pi(y)| / |x - y| over `n_pairs` pairs drawn uniformly from the
/// ball B(center, radius). A lower bound on the local Lipschitz constant.
double empirical_lipschitz(const PolicyNet& net, const VectorRef& center, double radius,
                           int n_pairs, std::uint64_t seed);

/// Debug weight dump: {arch, seed, layers: [{w: [[...]], b: [...]}]}.
nlohmann::json to_json(const PolicyNet& net);
PolicyNet policy_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Architecture& arch);
const char* to_string(Activation a);
const char* to_string(InitKind k);

}  // namespace polexp
