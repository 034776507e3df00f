#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/matrix.hpp"

namespace splitguard::nn {

// Probabilities entering a log are clamped to [kProbEps, 1 - kProbEps].
inline constexpr double kProbEps = 1e-7;

enum class LossKind { cross_entropy, mse, fsha_client, fsha_distinguisher };

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d pred
};

namespace detail {
inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }
}  // namespace detail

// Mean negative log-likelihood of integer labels under row-wise probabilities.
inline LossResult cross_entropy(const Matrix& probs, std::span<const int> labels) {
  if (labels.size() != probs.rows()) throw ConfigError("cross_entropy: label count mismatch");
  LossResult r{0.0, Matrix(probs.rows(), probs.cols())};
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const double p = detail::clamp_prob(probs(i, static_cast<std::size_t>(y)));
    r.loss -= std::log(p) * inv_n;
    r.grad(i, static_cast<std::size_t>(y)) = -inv_n / p;
  }
  return r;
}

// Mean over all elements of (pred - target)^2.
inline LossResult mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ConfigError("mse: shape mismatch");
  }
  LossResult r{0.0, Matrix(pred.rows(), pred.cols())};
  if (pred.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    r.loss += d * d * inv_n;
    r.grad.data()[i] = 2.0 * d * inv_n;
  }
  return r;
}

// L_f = mean log(1 - D(f(x_priv))). `d_priv` is the distinguisher's B x 1 output.
inline LossResult fsha_client(const Matrix& d_priv) {
  if (d_priv.cols() != 1) throw ConfigError("fsha_client: distinguisher output must be B x 1");
  LossResult r{0.0, Matrix(d_priv.rows(), 1)};
  const double inv_n = 1.0 / static_cast<double>(d_priv.rows());
  for (std::size_t i = 0; i < d_priv.rows(); ++i) {
    const double q = 1.0 - detail::clamp_prob(d_priv(i, 0));
    r.loss += std::log(q) * inv_n;
    r.grad(i, 0) = -inv_n / q;
  }
  return r;
}

// L_D = mean log(1 - D(enc(x_pub))) + mean log(D(f(x_priv))).
// `d_out` stacks distinguisher outputs; `is_public(i,0)` is 1 for encoder rows
// and 0 for client rows. Each term is averaged over its own rows.
inline LossResult fsha_distinguisher(const Matrix& d_out, const Matrix& is_public) {
  if (d_out.cols() != 1 || is_public.cols() != 1 || d_out.rows() != is_public.rows()) {
    throw ConfigError("fsha_distinguisher: expects matching B x 1 outputs and source flags");
  }
  std::size_t n_pub = 0;
  for (std::size_t i = 0; i < is_public.rows(); ++i) n_pub += is_public(i, 0) != 0.0 ? 1 : 0;
  const std::size_t n_priv = d_out.rows() - n_pub;
  LossResult r{0.0, Matrix(d_out.rows(), 1)};
  for (std::size_t i = 0; i < d_out.rows(); ++i) {
    const double p = detail::clamp_prob(d_out(i, 0));
    if (is_public(i, 0) != 0.0) {
      const double inv = 1.0 / static_cast<double>(n_pub);
      r.loss += std::log(1.0 - p) * inv;
      r.grad(i, 0) = -inv / (1.0 - p);
    } else {
      const double inv = 1.0 / static_cast<double>(n_priv);
      r.loss += std::log(p) * inv;
      r.grad(i, 0) = inv / p;
    }
  }
  return r;
}

// Binary cross-entropy form of the distinguisher objective: same minimizer as
// fsha_distinguisher, but the gradient does not vanish on misclassified rows.
inline LossResult fsha_distinguisher_xent(const Matrix& d_out, const Matrix& is_public) {
  if (d_out.cols() != 1 || is_public.cols() != 1 || d_out.rows() != is_public.rows()) {
    throw ConfigError("fsha_distinguisher_xent: expects matching B x 1 outputs and source flags");
  }
  std::size_t n_pub = 0;
  for (std::size_t i = 0; i < is_public.rows(); ++i) n_pub += is_public(i, 0) != 0.0 ? 1 : 0;
  const std::size_t n_priv = d_out.rows() - n_pub;
  LossResult r{0.0, Matrix(d_out.rows(), 1)};
  for (std::size_t i = 0; i < d_out.rows(); ++i) {
    const double p = detail::clamp_prob(d_out(i, 0));
    if (is_public(i, 0) != 0.0) {
      const double inv = 1.0 / static_cast<double>(n_pub);
      r.loss -= std::log(p) * inv;
      r.grad(i, 0) = -inv / p;
    } else {
      const double inv = 1.0 / static_cast<double>(n_priv);
      r.loss -= std::log(1.0 - p) * inv;
      r.grad(i, 0) = inv / (1.0 - p);
    }
  }
  return r;
}

// Uniform entry point. For cross_entropy the target holds one label per row in
// column 0; for fsha_distinguisher it holds the public-source flag; fsha_client
// ignores the target.
inline LossResult loss_and_grad(LossKind kind, const Matrix& pred, const Matrix& target) {
  switch (kind) {
    case LossKind::cross_entropy: {
      std::vector<int> labels(target.rows());
      for (std::size_t i = 0; i < target.rows(); ++i) labels[i] = static_cast<int>(target(i, 0));
      return cross_entropy(pred, labels);
    }
    case LossKind::mse:
      return mse(pred, target);
    case LossKind::fsha_client:
      return fsha_client(pred);
    case LossKind::fsha_distinguisher:
      return fsha_distinguisher(pred, target);
  }
  throw UsageError("loss_and_grad: unknown loss kind");
}

}  // namespace splitguard::nn
