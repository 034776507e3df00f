#pragma once

// One round of the split-learning exchange: the server turns the client's
// boundary activations into a boundary gradient, and the client backpropagates
// it through its own layers.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/loss.hpp"
#include "splitguard/nn/network.hpp"
#include "splitguard/protocol/models.hpp"

namespace splitguard::protocol {

struct HeadResult {
  nn::Matrix grad;  // d loss / d server_output
  double loss = 0.0;
};

// Private-label setup: the client finishes the forward pass on the server's
// output, computes the loss locally and returns the gradient to the server.
using HeadCallback = std::function<HeadResult(const nn::Matrix& server_output)>;

struct ServerStepResult {
  nn::Matrix boundary_grad;
  double loss = 0.0;
};

namespace detail {

// Honest classification step; updates the server body.
inline ServerStepResult honest_step(ServerModel& server, const nn::Matrix& client_output,
                                    std::optional<std::span<const int>> labels,
                                    const HeadCallback* head) {
  auto fwd = nn::forward(server.body, client_output);
  nn::Matrix upstream;
  double loss = 0.0;
  if (labels) {
    auto l = nn::cross_entropy(fwd.output, *labels);
    upstream = std::move(l.grad);
    loss = l.loss;
  } else if (head && *head) {
    auto h = (*head)(fwd.output);
    upstream = std::move(h.grad);
    loss = h.loss;
  } else {
    throw ProtocolError("server_step: classification needs labels or a client head");
  }
  if (!std::isfinite(loss)) throw NumericError("server_step: non-finite classification loss");
  auto back = nn::backward(server.body, fwd.cache, upstream);
  server.body_opt.step(server.body, back.param_grad);
  return {std::move(back.input_grad), loss};
}

// One distinguisher update on a fresh X_pub batch, then the gradient of
// L_f = log(1 - D(f(x_priv))) with respect to the client output.
inline ServerStepResult fsha_step(ServerModel& server, const nn::Matrix& client_output) {
  if (!server.fsha || !server.fsha->setup_done) {
    throw UsageError("server_step: FSHA behavior requires a completed setup phase");
  }
  FshaState& st = *server.fsha;
  const auto& pub = *st.pub_data;
  const std::size_t b = client_output.rows();
  std::vector<std::size_t> idx(b);
  std::uniform_int_distribution<std::size_t> pick(0, pub.size() - 1);
  for (auto& i : idx) i = pick(server.rng);
  const nn::Matrix encoded = nn::predict(st.encoder, nn::select_rows(pub.examples, idx));

  const nn::Matrix stacked = nn::vstack(encoded, client_output);
  nn::Matrix is_public(stacked.rows(), 1, 0.0);
  for (std::size_t i = 0; i < encoded.rows(); ++i) is_public(i, 0) = 1.0;
  auto d_fwd = nn::forward(st.distinguisher, stacked);
  const auto d_loss = st.distinguisher_loss == DistinguisherLoss::literal
                          ? nn::fsha_distinguisher(d_fwd.output, is_public)
                          : nn::fsha_distinguisher_xent(d_fwd.output, is_public);
  if (!std::isfinite(d_loss.loss)) throw NumericError("server_step: distinguisher loss diverged");
  const auto d_back = nn::backward(st.distinguisher, d_fwd.cache, d_loss.grad);
  st.distinguisher_opt.step(st.distinguisher, d_back.param_grad);

  auto f_fwd = nn::forward(st.distinguisher, client_output);
  const auto f_loss = nn::fsha_client(f_fwd.output);
  const auto f_back = nn::backward(st.distinguisher, f_fwd.cache, f_loss.grad);
  return {f_back.input_grad, f_loss.loss};
}

}  // namespace detail

// Server's reply to one batch of boundary activations.
//   honest    : d(cross-entropy)/d(client_output)
//   fsha      : distinguisher update, then d L_f / d(client_output); labels unused
//   multitask : w * fsha + (1 - w) * honest, w = attack_weight
inline ServerStepResult server_step(ServerModel& server, const nn::Matrix& client_output,
                                    std::optional<std::span<const int>> labels,
                                    const HeadCallback* head = nullptr) {
  if (client_output.cols() != server.body.input_dim()) {
    throw ConfigError("server_step: client output width does not match boundary dim");
  }
  if (labels && labels->size() != client_output.rows()) {
    throw ProtocolError("server_step: label count does not match batch size");
  }
  switch (server.behavior.kind) {
    case BehaviorKind::honest:
      return detail::honest_step(server, client_output, labels, head);
    case BehaviorKind::fsha:
      return detail::fsha_step(server, client_output);
    case BehaviorKind::multitask: {
      if (!labels) throw ProtocolError("server_step: multitask behavior needs shared labels");
      const double w = server.behavior.attack_weight;
      auto attack = detail::fsha_step(server, client_output);
      auto task = detail::honest_step(server, client_output, labels, nullptr);
      ServerStepResult out{nn::Matrix(client_output.rows(), client_output.cols()),
                           w * attack.loss + (1.0 - w) * task.loss};
      for (std::size_t i = 0; i < out.boundary_grad.size(); ++i) {
        out.boundary_grad.data()[i] =
            w * attack.boundary_grad.data()[i] + (1.0 - w) * task.boundary_grad.data()[i];
      }
      return out;
    }
  }
  throw UsageError("server_step: unknown behavior");
}

// Backpropagates the boundary gradient through the client front. Parameters
// change only when `apply_update` is set.
inline nn::GradVec client_step(ClientModel& client, const nn::ForwardResult& front_fwd,
                               const nn::Matrix& boundary_grad, bool apply_update) {
  if (boundary_grad.rows() != front_fwd.output.rows() ||
      boundary_grad.cols() != front_fwd.output.cols()) {
    throw ConfigError("client_step: boundary gradient shape does not match client output");
  }
  auto back = nn::backward(client.front, front_fwd.cache, boundary_grad);
  if (!back.param_grad.all_finite()) throw NumericError("client_step: non-finite gradient");
  if (apply_update) client.front_opt.step(client.front, back.param_grad);
  return std::move(back.param_grad);
}

inline nn::GradVec client_step(ClientModel& client, const nn::Matrix& x,
                               const nn::Matrix& boundary_grad, bool apply_update) {
  return client_step(client, nn::forward(client.front, x), boundary_grad, apply_update);
}

template <class Rng>
ServerModel make_server(const SplitSetup& setup, const ServerBehavior& behavior,
                        const OptimConfig& opt, std::optional<FshaState> fsha, Rng& rng) {
  behavior.validate();
  if (behavior.kind != BehaviorKind::honest && !fsha) {
    throw ConfigError("make_server: attack behavior needs FSHA state");
  }
  ServerModel s;
  s.behavior = behavior;
  s.body = make_server_body(setup, rng);
  s.body_opt = nn::SgdOptimizer(opt.lr, opt.momentum);
  s.fsha = std::move(fsha);
  s.rng.seed(rng());
  return s;
}

}  // namespace splitguard::protocol
