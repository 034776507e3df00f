#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/matrix.hpp"

namespace splitguard::nn {

enum class Activation { identity, relu, sigmoid, tanh, softmax };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Flattened gradient of every parameter of one network, in the same order as
// Network::parameters(): layer by layer, weights (row-major, out x in) then bias.
struct GradVec {
  std::vector<double> values;

  GradVec() = default;
  explicit GradVec(std::size_t dim) : values(dim, 0.0) {}
  explicit GradVec(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const noexcept { return values.size(); }

  double norm() const noexcept {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  bool all_finite() const noexcept {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const GradVec&, const GradVec&) = default;
};

// Layer inputs and outputs recorded by forward(); consumed by backward().
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
};

// A chain of dense layers y = act(x W^T + b). Value type; copying a network
// copies its parameters.
class Network {
 public:
  Network() = default;

  explicit Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("Network: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.in_dim == 0 || l.out_dim == 0) throw ConfigError("Network: zero-sized layer");
      if (i > 0 && layers_[i - 1].out_dim != l.in_dim) {
        throw ConfigError("Network: layer " + std::to_string(i) + " in_dim " +
                          std::to_string(l.in_dim) + " does not match previous out_dim " +
                          std::to_string(layers_[i - 1].out_dim));
      }
      if (l.activation == Activation::softmax && i + 1 != layers_.size()) {
        throw ConfigError("Network: softmax allowed only on the final layer");
      }
      weights_.emplace_back(l.out_dim, l.in_dim);
      biases_.emplace_back(l.out_dim, 0.0);
    }
  }

  // Uniform Glorot initialization, biases zero.
  template <class Rng>
  Network(std::vector<LayerSpec> layers, Rng& rng) : Network(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(layers_[i].in_dim + layers_[i].out_dim));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& w : weights_[i].data()) w = dist(rng);
    }
  }

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return layers_.front().in_dim; }
  std::size_t output_dim() const noexcept { return layers_.back().out_dim; }

  Matrix& weight(std::size_t layer) { return weights_.at(layer); }
  const Matrix& weight(std::size_t layer) const { return weights_.at(layer); }
  std::vector<double>& bias(std::size_t layer) { return biases_.at(layer); }
  const std::vector<double>& bias(std::size_t layer) const { return biases_.at(layer); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.out_dim * l.in_dim + l.out_dim;
    return n;
  }

  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.insert(out.end(), weights_[i].data().begin(), weights_[i].data().end());
      out.insert(out.end(), biases_[i].begin(), biases_[i].end());
    }
    return out;
  }

  void set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
      throw ConfigError("set_parameters: expected " + std::to_string(parameter_count()) +
                        " values, got " + std::to_string(flat.size()));
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (double& w : weights_[i].data()) w = flat[k++];
      for (double& b : biases_[i]) b = flat[k++];
    }
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;
};

namespace detail {

inline void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::sigmoid:
      for (double& v : z.data()) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
      return;
    case Activation::tanh:
      for (double& v : z.data()) v = std::tanh(v);
      return;
    case Activation::softmax:
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : row) v /= sum;
      }
      return;
  }
}

// Gradient w.r.t. pre-activation given the activation output and upstream gradient.
inline Matrix activation_backward(Activation act, const Matrix& out, const Matrix& g) {
  Matrix dz(g.rows(), g.cols());
  switch (act) {
    case Activation::identity:
      return g;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        dz.data()[i] = out.data()[i] > 0.0 ? g.data()[i] : 0.0;
      }
      return dz;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = out.data()[i];
        dz.data()[i] = g.data()[i] * s * (1.0 - s);
      }
      return dz;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = out.data()[i];
        dz.data()[i] = g.data()[i] * (1.0 - t * t);
      }
      return dz;
    case Activation::softmax:
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto s = out.row(r);
        auto gr = g.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < s.size(); ++c) dot += s[c] * gr[c];
        auto d = dz.row(r);
        for (std::size_t c = 0; c < s.size(); ++c) d[c] = s[c] * (gr[c] - dot);
      }
      return dz;
  }
  return dz;
}

}  // namespace detail

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

inline ForwardResult forward(const Network& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) {
    throw ConfigError("forward: input has " + std::to_string(x.cols()) +
                      " columns, network expects " + std::to_string(net.input_dim()));
  }
  ForwardResult res;
  const auto& layers = net.layers();
  res.cache.inputs.reserve(layers.size());
  res.cache.outputs.reserve(layers.size());
  Matrix a = x;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& spec = layers[li];
    const Matrix& w = net.weight(li);
    const auto& b = net.bias(li);
    Matrix z(a.rows(), spec.out_dim);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      auto in = a.row(r);
      auto outr = z.row(r);
      for (std::size_t o = 0; o < spec.out_dim; ++o) {
        auto wr = w.row(o);
        double acc = b[o];
        for (std::size_t i = 0; i < spec.in_dim; ++i) acc += wr[i] * in[i];
        outr[o] = acc;
      }
    }
    detail::apply_activation(spec.activation, z);
    res.cache.inputs.push_back(std::move(a));
    res.cache.outputs.push_back(z);
    a = std::move(z);
  }
  res.output = std::move(a);
  return res;
}

// Convenience when no cache is needed.
inline Matrix predict(const Network& net, const Matrix& x) { return forward(net, x).output; }

struct BackwardResult {
  GradVec param_grad;
  Matrix input_grad;
};

inline BackwardResult backward(const Network& net, const ForwardCache& cache,
                               const Matrix& upstream) {
  const auto& layers = net.layers();
  if (cache.inputs.size() != layers.size() || cache.outputs.size() != layers.size()) {
    throw UsageError("backward: missing or mismatched forward cache");
  }
  const Matrix& last = cache.outputs.back();
  if (upstream.rows() != last.rows() || upstream.cols() != last.cols()) {
    throw ConfigError("backward: upstream gradient shape does not match network output");
  }

  // Offsets of each layer's block inside the flat gradient.
  std::vector<std::size_t> offset(layers.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    offset[i] = total;
    total += layers[i].out_dim * layers[i].in_dim + layers[i].out_dim;
  }

  BackwardResult res{GradVec(total), Matrix()};
  Matrix g = upstream;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& spec = layers[li];
    const Matrix dz = detail::activation_backward(spec.activation, cache.outputs[li], g);
    const Matrix& a = cache.inputs[li];
    const Matrix& w = net.weight(li);
    double* dw = res.param_grad.values.data() + offset[li];
    double* db = dw + spec.out_dim * spec.in_dim;
    Matrix da(a.rows(), spec.in_dim);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      auto dzr = dz.row(r);
      auto ar = a.row(r);
      auto dar = da.row(r);
      for (std::size_t o = 0; o < spec.out_dim; ++o) {
        const double d = dzr[o];
        if (d == 0.0) continue;
        db[o] += d;
        double* dwr = dw + o * spec.in_dim;
        auto wr = w.row(o);
        for (std::size_t i = 0; i < spec.in_dim; ++i) {
          dwr[i] += d * ar[i];
          dar[i] += d * wr[i];
        }
      }
    }
    g = std::move(da);
  }
  res.input_grad = std::move(g);
  return res;
}

inline std::vector<double> flatten(const GradVec& g) { return g.values; }

inline GradVec unflatten(std::span<const double> flat, const Network& like) {
  if (flat.size() != like.parameter_count()) {
    throw ConfigError("unflatten: size does not match parameter count");
  }
  return GradVec(std::vector<double>(flat.begin(), flat.end()));
}

// Builds an MLP from a dimension chain: dims = {in, h1, ..., out}; hidden layers
// use `hidden`, the last layer uses `last`.
template <class Rng>
Network make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation last, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("make_mlp: need at least input and output dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    specs.push_back({dims[i], dims[i + 1], i + 2 == dims.size() ? last : hidden});
  }
  return Network(std::move(specs), rng);
}

template <class Rng>
Network make_mlp(std::initializer_list<std::size_t> dims, Activation hidden, Activation last,
                 Rng& rng) {
  std::vector<std::size_t> d(dims);
  return make_mlp(std::span<const std::size_t>(d), hidden, last, rng);
}

}  // namespace splitguard::nn
