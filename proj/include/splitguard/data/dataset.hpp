#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/matrix.hpp"

namespace splitguard::data {

using nn::Matrix;
using Labels = std::vector<int>;

struct Dataset {
  Matrix examples;  // n x d
  Labels labels;    // length n, each in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return examples.cols(); }

  void validate() const {
    if (labels.empty() || examples.rows() != labels.size() || examples.cols() == 0) {
      throw ConfigError("Dataset: need n >= 1, d >= 1 and one label per row");
    }
    if (num_classes < 1) throw ConfigError("Dataset: num_classes must be >= 1");
    for (int y : labels) {
      if (y < 0 || y >= num_classes) throw ConfigError("Dataset: label out of range");
    }
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.examples = nn::select_rows(examples, idx);
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(labels[i]);
    out.num_classes = num_classes;
    return out;
  }
};

// Gaussian clusters, one per class. Cluster means are N(0, 1) per coordinate
// (drawn from the seed); samples are mean + spread * N(0, 1). Labels cycle
// 0, 1, ..., L-1 so every class is populated.
inline Dataset synth_blobs(std::size_t n, std::size_t d, int num_classes, double spread,
                           std::uint64_t seed) {
  if (num_classes < 1 || n < static_cast<std::size_t>(num_classes) || d < 2) {
    throw ConfigError("synth_blobs: need n >= L >= 1 and d >= 2");
  }
  if (!(spread >= 0.0)) throw ConfigError("synth_blobs: spread must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(static_cast<std::size_t>(num_classes), d);
  for (double& v : means.data()) v = normal(rng);

  Dataset ds;
  ds.num_classes = num_classes;
  ds.examples = Matrix(n, d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    ds.labels[i] = y;
    auto mean = means.row(static_cast<std::size_t>(y));
    auto row = ds.examples.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = mean[j] + (spread > 0.0 ? spread * normal(rng) : 0.0);
    }
  }
  return ds;
}

// Share of the client's data set aside for local simulation and for the
// attacker's public set.
struct SplitSpec {
  double sim_fraction = 0.0;
  double pub_fraction = 0.0;
  double pub_noise = 0.0;  // extra Gaussian noise on X_pub to model distribution shift

  void validate() const {
    if (sim_fraction < 0.0 || pub_fraction < 0.0 || sim_fraction + pub_fraction >= 1.0) {
      throw ConfigError("SplitSpec: fractions must be >= 0 and sum to < 1");
    }
    if (pub_noise < 0.0) throw ConfigError("SplitSpec: pub_noise must be >= 0");
  }
};

struct DataSplits {
  Dataset train;  // X_priv used for split-learning batches
  Dataset sim;    // train_SIM (may be empty when sim_fraction = 0)
  Dataset pub;    // X_pub handed to the attacker
  std::vector<std::size_t> train_idx, sim_idx, pub_idx;  // indices into the source
};

// Disjoint split covering every source index exactly once.
inline DataSplits split_dataset(const Dataset& src, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::size_t> order(src.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(src.size());
  const auto n_sim = static_cast<std::size_t>(std::ceil(spec.sim_fraction * n));
  const auto n_pub = static_cast<std::size_t>(std::floor(spec.pub_fraction * n));
  if (n_sim + n_pub >= src.size()) throw ConfigError("split_dataset: nothing left for training");

  DataSplits out;
  out.sim_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_sim));
  out.pub_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_sim),
                     order.begin() + static_cast<std::ptrdiff_t>(n_sim + n_pub));
  out.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_sim + n_pub), order.end());
  out.train = src.subset(out.train_idx);
  out.sim = src.subset(out.sim_idx);
  out.pub = src.subset(out.pub_idx);
  if (spec.pub_noise > 0.0) {
    std::normal_distribution<double> normal(0.0, spec.pub_noise);
    for (double& v : out.pub.examples.data()) v += normal(rng);
  }
  return out;
}

// A shuffled pass over n examples in fixed-size batches. The final short
// batch is dropped so every batch has exactly batch_size rows.
struct BatchPlan {
  std::size_t batch_size = 32;
  std::vector<std::size_t> order;
  std::uint64_t seed = 0;

  static BatchPlan make(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw ConfigError("BatchPlan: batch_size must be >= 1");
    BatchPlan p;
    p.batch_size = batch_size;
    p.seed = seed;
    p.order.resize(n);
    std::iota(p.order.begin(), p.order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(p.order.begin(), p.order.end(), rng);
    return p;
  }

  std::size_t batch_count() const noexcept { return order.size() / batch_size; }

  std::span<const std::size_t> batch(std::size_t b) const {
    if (b >= batch_count()) throw UsageError("BatchPlan: batch index out of range");
    return {order.data() + b * batch_size, batch_size};
  }
};

// Replaces exactly floor(b_fake * |y|) positions, chosen uniformly without
// replacement, with labels drawn uniformly from all classes. With
// `exclude_true` the replacement is drawn from the other L-1 classes instead.
template <class Rng>
Labels randomize_labels(std::span<const int> y, double b_fake, int num_classes, Rng& rng,
                        bool exclude_true = false) {
  if (b_fake < 0.0 || b_fake > 1.0) throw ConfigError("randomize_labels: B_F must be in [0,1]");
  if (num_classes < 1 || (exclude_true && num_classes < 2)) {
    throw ConfigError("randomize_labels: not enough classes");
  }
  Labels out(y.begin(), y.end());
  const auto count =
      static_cast<std::size_t>(std::floor(b_fake * static_cast<double>(y.size()) + 1e-12));
  if (count == 0) return out;
  std::vector<std::size_t> pos(y.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = pos[i];
    if (exclude_true) {
      std::uniform_int_distribution<int> cls(0, num_classes - 2);
      int c = cls(rng);
      if (c >= out[p]) ++c;
      out[p] = c;
    } else {
      std::uniform_int_distribution<int> cls(0, num_classes - 1);
      out[p] = cls(rng);
    }
  }
  return out;
}

// Expected accuracy on a fake batch for a model of accuracy A when randomized
// labels are drawn from all L classes: (1 - B_F) A + B_F A / L.
inline double expected_fake_accuracy(double accuracy, double b_fake, double num_classes) {
  if (accuracy < 0.0 || accuracy > 1.0 || b_fake < 0.0 || b_fake > 1.0) {
    throw ConfigError("expected_fake_accuracy: A and B_F must be in [0,1]");
  }
  return (1.0 - b_fake) * accuracy + b_fake * accuracy / num_classes;
}

// Per-feature mean of the examples, as a 1 x d matrix.
inline Matrix mean_example(const Matrix& x) {
  Matrix m(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) m(0, c) += x(r, c);
  }
  for (double& v : m.data()) v /= static_cast<double>(x.rows());
  return m;
}

// MSE of predicting every row with the mean row.
inline double mean_image_baseline_mse(const Matrix& x) {
  const Matrix m = mean_example(x);
  double acc = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(r, c) - m(0, c);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(x.size());
}

}  // namespace splitguard::data
