#include "polexp/policy.hpp"

#include <cmath>
#include <string>

#include "polexp/error.hpp"
#include "polexp/rng.hpp"

namespace polexp {
namespace {

// Streams inside one network seed.
constexpr std::uint64_t kWeightStream = 0x57E1'6475ULL;
constexpr std::uint64_t kPowerIterStream = 0x5BEC'7A1EULL;

double weight_variance(const InitScheme& init, std::size_t layer, int fan_in, int fan_out) {
  if (init.kind == InitKind::xavier_glorot) return 2.0 / (fan_in + fan_out);
  return layer == 0 ? init.sigma_w * init.sigma_w : 2.0 / fan_in;
}

void activate(Activation act, Vector& x) {
  if (act == Activation::relu) {
    x = x.cwiseMax(0.0);
  } else {
    x = x.array().tanh().matrix();
  }
}

std::vector<int> layer_widths(const Architecture& arch) {
  std::vector<int> widths;
  widths.reserve(arch.hidden.size() + 2);
  widths.push_back(arch.input_dim);
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.output_dim);
  return widths;
}

}  // namespace

void InitScheme::validate() const {
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w))
    throw InvalidArgument("init: sigma_w must be finite and >= 0");
  if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b))
    throw InvalidArgument("init: sigma_b must be finite and >= 0");
}

void Architecture::validate() const {
  if (input_dim <= 0) throw InvalidArgument("architecture: input_dim must be positive");
  if (output_dim <= 0) throw InvalidArgument("architecture: output_dim must be positive");
  if (hidden.empty()) throw InvalidArgument("architecture: at least one hidden layer required");
  for (int w : hidden)
    if (w <= 0) throw InvalidArgument("architecture: hidden widths must be positive");
}

PolicyNet::PolicyNet(Architecture arch, std::vector<Layer> layers, std::uint64_t seed)
    : arch_(std::move(arch)), layers_(std::move(layers)), seed_(seed) {
  arch_.validate();
  const auto widths = layer_widths(arch_);
  if (layers_.size() + 1 != widths.size())
    throw DimensionError("policy: expected " + std::to_string(widths.size() - 1) + " layers, got " +
                         std::to_string(layers_.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.cols() != widths[l] || layer.weight.rows() != widths[l + 1] ||
        layer.bias.size() != widths[l + 1])
      throw DimensionError("policy: layer " + std::to_string(l) + " has shape " +
                           std::to_string(layer.weight.rows()) + "x" +
                           std::to_string(layer.weight.cols()) + ", expected " +
                           std::to_string(widths[l + 1]) + "x" + std::to_string(widths[l]));
  }
}

Vector PolicyNet::operator()(const VectorRef& s) const {
  Vector x = s;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].bias;
    z.noalias() += layers_[l].weight * x;
    if (l + 1 < layers_.size()) activate(arch_.activation, z);
    x = std::move(z);
  }
  return x;
}

PolicyNet sample_policy(const Architecture& arch, const InitScheme& init, std::uint64_t seed) {
  arch.validate();
  init.validate();
  const auto widths = layer_widths(arch);
  Rng rng(split_seed(seed, kWeightStream));
  std::vector<Layer> layers;
  layers.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double w_std = std::sqrt(weight_variance(init, l, fan_in, fan_out));
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = w_std * rng.normal();
    const bool readout = l + 2 == widths.size();
    if (readout && init.sigma_b > 0.0)
      for (int i = 0; i < fan_out; ++i) layer.bias(i) = init.sigma_b * rng.normal();
    layers.push_back(std::move(layer));
  }
  return PolicyNet(arch, std::move(layers), seed);
}

Vector forward(const PolicyNet& net, const VectorRef& s) {
  if (s.size() != net.arch().input_dim)
    throw DimensionError("forward: state has dimension " + std::to_string(s.size()) +
                         ", network expects " + std::to_string(net.arch().input_dim));
  return net(s);
}

Vector sample_forward(const Architecture& arch, const InitScheme& init, const VectorRef& s,
                      std::uint64_t seed) {
  if (s.size() != arch.input_dim)
    throw DimensionError("sample_forward: state has dimension " + std::to_string(s.size()) +
                         ", architecture expects " + std::to_string(arch.input_dim));
  const auto widths = layer_widths(arch);
  Rng rng(split_seed(seed, kWeightStream));
  Vector x = s;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool readout = l + 2 == widths.size();
    const double var_b = readout ? init.sigma_b * init.sigma_b : 0.0;
    const double scale = std::sqrt(weight_variance(init, l, widths[l], widths[l + 1]) *
                                       x.squaredNorm() +
                                   var_b);
    Vector z(widths[l + 1]);
    for (auto& zi : z) zi = scale * rng.normal();
    if (!readout) activate(arch.activation, z);
    x = std::move(z);
  }
  return x;
}

double spectral_norm(const Matrix& w, std::uint64_t seed, double rel_tol) {
  if (w.size() == 0 || w.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Rng rng(split_seed(seed, kPowerIterStream));
  Vector v(w.cols());
  for (auto& vi : v) vi = rng.normal();
  v.normalize();
  double estimate = 0.0;
  constexpr int kMinIter = 50;
  constexpr int kMaxIter = 10'000;
  for (int it = 0; it < kMaxIter; ++it) {
    const Vector wv = w * v;
    const double next = wv.norm();
    Vector u = w.transpose() * wv;
    const double u_norm = u.norm();
    if (u_norm == 0.0) return next;
    v = u / u_norm;
    const bool converged = std::abs(next - estimate) <= rel_tol * next;
    estimate = next;
    if (it + 1 >= kMinIter && converged) break;
  }
  return estimate;
}

double spectral_norm_product(const PolicyNet& net) {
  double product = 1.0;
  std::uint64_t k = 0;
  for (const auto& layer : net.layers()) {
    product *= spectral_norm(layer.weight, split_seed(net.seed(), k++));
    if (product == 0.0) break;
  }
  return product;
}

double lipschitz_upper_bound(const PolicyNet& net) {
  return kLipschitzSafetyFactor * spectral_norm_product(net);
}

double empirical_lipschitz(const PolicyNet& net, const VectorRef& center, double radius,
                           int n_pairs, std::uint64_t seed) {
  if (!(radius > 0.0)) throw InvalidArgument("empirical_lipschitz: radius must be positive");
  if (n_pairs < 1) throw InvalidArgument("empirical_lipschitz: n_pairs must be >= 1");
  const auto d = center.size();
  Rng rng(seed);
  auto draw = [&] {
    Vector dir(d);
    for (auto& x : dir) x = rng.normal();
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    return Vector(center + dir.normalized() * r);
  };
  double best = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    const Vector x = draw();
    const Vector y = draw();
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    best = std::max(best, (forward(net, x) - forward(net, y)).norm() / dist);
  }
  return best;
}

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

const char* to_string(InitKind k) {
  return k == InitKind::gaussian ? "gaussian" : "xavier_glorot";
}

nlohmann::json to_json(const Architecture& arch) {
  return {{"input_dim", arch.input_dim},
          {"hidden", arch.hidden},
          {"output_dim", arch.output_dim},
          {"activation", to_string(arch.activation)}};
}

nlohmann::json to_json(const PolicyNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      std::vector<double> row(layer.weight.cols());
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) row[j] = layer.weight(i, j);
      w.push_back(row);
    }
    layers.push_back({{"w", w}, {"b", std::vector<double>(layer.bias.begin(), layer.bias.end())}});
  }
  return {{"arch", to_json(net.arch())}, {"seed", net.seed()}, {"layers", layers}};
}

PolicyNet policy_from_json(const nlohmann::json& j) {
  try {
    Architecture arch;
    const auto& a = j.at("arch");
    arch.input_dim = a.at("input_dim").get<int>();
    arch.hidden = a.at("hidden").get<std::vector<int>>();
    arch.output_dim = a.at("output_dim").get<int>();
    const auto act = a.at("activation").get<std::string>();
    if (act == "relu") {
      arch.activation = Activation::relu;
    } else if (act == "tanh") {
      arch.activation = Activation::tanh;
    } else {
      throw InvalidArgument("policy json: unknown activation '" + act + "'");
    }
    std::vector<Layer> layers;
    for (const auto& lj : j.at("layers")) {
      const auto rows = lj.at("w").get<std::vector<std::vector<double>>>();
      const auto bias = lj.at("b").get<std::vector<double>>();
      const auto cols = rows.empty() ? 0 : rows.front().size();
      Layer layer{Matrix(rows.size(), cols), Vector(bias.size())};
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw DimensionError("policy json: ragged weight matrix");
        for (std::size_t c = 0; c < cols; ++c) layer.weight(r, c) = rows[r][c];
      }
      for (std::size_t r = 0; r < bias.size(); ++r) layer.bias(r) = bias[r];
      layers.push_back(std::move(layer));
    }
    return PolicyNet(std::move(arch), std::move(layers), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("policy json: ") + e.what());
  }
}

}  // namespace polexp
