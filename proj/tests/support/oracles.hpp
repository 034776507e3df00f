#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond the public types they read.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/nn/network.hpp"

namespace oracle {

using Point = std::vector<double>;

inline double dist(const Point& a, const Point& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc));
}

// Plain dense forward pass written out from the layer specs and the flat
// parameter vector (weights row-major out x in, then bias, layer by layer).
inline std::vector<double> forward_row(const std::vector<splitguard::nn::LayerSpec>& layers,
                                       const std::vector<double>& params, std::vector<double> a) {
  using splitguard::nn::Activation;
  std::size_t off = 0;
  for (const auto& l : layers) {
    std::vector<double> z(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      double s = params[off + l.out_dim * l.in_dim + o];
      for (std::size_t i = 0; i < l.in_dim; ++i) s += params[off + o * l.in_dim + i] * a[i];
      z[o] = s;
    }
    off += l.out_dim * l.in_dim + l.out_dim;
    switch (l.activation) {
      case Activation::identity: break;
      case Activation::relu: for (double& v : z) v = v > 0.0 ? v : 0.0; break;
      case Activation::sigmoid: for (double& v : z) v = 1.0 / (1.0 + std::exp(-v)); break;
      case Activation::tanh: for (double& v : z) v = std::tanh(v); break;
      case Activation::softmax: {
        const double m = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double& v : z) s += (v = std::exp(v - m));
        for (double& v : z) v /= s;
        break;
      }
    }
    a = std::move(z);
  }
  return a;
}

// Squared error averaged over every output element.
inline double mse_loss(const std::vector<splitguard::nn::LayerSpec>& layers,
                       const std::vector<double>& params, const std::vector<Point>& x,
                       const std::vector<Point>& y) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto out = forward_row(layers, params, x[r]);
    for (std::size_t c = 0; c < out.size(); ++c, ++n) acc += (out[c] - y[r][c]) * (out[c] - y[r][c]);
  }
  return acc / static_cast<double>(n);
}

// Central differences of `loss(params)`.
template <class Loss>
std::vector<double> central_differences(const std::vector<double>& params, Loss&& loss,
                                        double h = 1e-6) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params;
    p[i] = params[i] + h;
    const double up = loss(p);
    p[i] = params[i] - h;
    const double down = loss(p);
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// LOF straight from the definitions, O(n^2) per query. Neighbourhoods hold
// every point within the k-distance; reachability uses the neighbour's
// k-distance.
class NaiveLof {
 public:
  NaiveLof(std::vector<Point> pts, std::size_t k) : pts_(std::move(pts)), k_(k) {
    kd_.resize(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) kd_[i] = kdist(pts_[i], i);
    lrd_.resize(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) lrd_[i] = density(pts_[i], i);
  }

  double score(const Point& q) const { return ratio(q, pts_.size()); }
  double train_score(std::size_t i) const { return ratio(pts_[i], i); }

 private:
  double kdist(const Point& p, std::size_t self) const {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts_.size(); ++j) if (j != self) d.push_back(dist(p, pts_[j]));
    std::sort(d.begin(), d.end());
    return d[k_ - 1];
  }
  std::vector<std::size_t> nbrs(const Point& p, std::size_t self) const {
    const double kd = kdist(p, self);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < pts_.size(); ++j) {
      if (j != self && dist(p, pts_[j]) <= kd) out.push_back(j);
    }
    return out;
  }
  double density(const Point& p, std::size_t self) const {
    const auto nb = nbrs(p, self);
    double s = 0.0;
    for (std::size_t o : nb) s += std::max(dist(p, pts_[o]), kd_[o]);
    if (s == 0.0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(nb.size()) / s;
  }
  double ratio(const Point& p, std::size_t self) const {
    const auto nb = nbrs(p, self);
    const double own = density(p, self);
    double s = 0.0;
    std::size_t inf = 0;
    for (std::size_t o : nb) {
      if (std::isinf(lrd_[o])) ++inf;
      else s += lrd_[o];
    }
    // Duplicate clusters: an infinite density over infinite densities counts as 1.
    if (std::isinf(own)) return static_cast<double>(inf) / static_cast<double>(nb.size());
    if (inf) return std::numeric_limits<double>::infinity();
    return s / (static_cast<double>(nb.size()) * own);
  }

  std::vector<Point> pts_;
  std::size_t k_;
  std::vector<double> kd_, lrd_;
};

// Every gradient kept; sum and mean norm recomputed from scratch.
struct StoreAll {
  std::vector<Point> items;

  Point sum() const {
    Point s(items.empty() ? 0 : items.front().size(), 0.0);
    for (const auto& g : items) for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
    return s;
  }
  double mean_norm() const {
    double acc = 0.0;
    for (const auto& g : items) acc += dist(g, Point(g.size(), 0.0));
    return acc / static_cast<double>(items.size());
  }
};

// Multinomial logistic regression by full-batch gradient descent.
inline double logistic_regression_accuracy(const splitguard::data::Dataset& ds,
                                           std::size_t epochs = 200, double lr = 0.5) {
  const std::size_t n = ds.size(), d = ds.dim();
  const auto L = static_cast<std::size_t>(ds.num_classes);
  std::vector<double> w(L * (d + 1), 0.0);
  std::vector<double> p(L);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> g(w.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = ds.examples.row(r);
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < L; ++c) {
        double z = w[c * (d + 1) + d];
        for (std::size_t i = 0; i < d; ++i) z += w[c * (d + 1) + i] * x[i];
        p[c] = z;
        m = std::max(m, z);
      }
      double s = 0.0;
      for (double& v : p) s += (v = std::exp(v - m));
      for (std::size_t c = 0; c < L; ++c) {
        const double err = p[c] / s - (static_cast<int>(c) == ds.labels[r] ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) g[c * (d + 1) + i] += err * x[i];
        g[c * (d + 1) + d] += err;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i] / static_cast<double>(n);
  }
  std::size_t ok = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = ds.examples.row(r);
    std::size_t best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < L; ++c) {
      double z = w[c * (d + 1) + d];
      for (std::size_t i = 0; i < d; ++i) z += w[c * (d + 1) + i] * x[i];
      if (z > best_z) best_z = z, best = c;
    }
    if (static_cast<int>(best) == ds.labels[r]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

}  // namespace oracle
