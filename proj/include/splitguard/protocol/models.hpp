#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/error.hpp"
#include "splitguard/nn/network.hpp"
#include "splitguard/nn/sgd.hpp"

namespace splitguard::protocol {

enum class SetupVariant { label_sharing, private_label };

inline std::string_view to_string(SetupVariant v) {
  return v == SetupVariant::label_sharing ? "label_sharing" : "private_label";
}

inline SetupVariant parse_variant(std::string_view s) {
  if (s == "label_sharing" || s == "label-sharing") return SetupVariant::label_sharing;
  if (s == "private_label" || s == "private-label") return SetupVariant::private_label;
  throw ConfigError("unknown setup variant '" + std::string(s) + "'");
}

// Layer sizes of the split model.
//   client front : input -> client_hidden -> boundary
//   server (label sharing)  : boundary -> server_hidden -> classes (softmax)
//   server (private label)  : boundary -> server_hidden
//   client head (private)   : server_hidden -> classes (softmax)
struct SplitSetup {
  SetupVariant variant = SetupVariant::label_sharing;
  std::size_t input_dim = 16;
  std::size_t client_hidden = 32;
  std::size_t boundary_dim = 16;
  std::size_t server_hidden = 32;
  int num_classes = 4;
  nn::Activation boundary_activation = nn::Activation::tanh;

  void validate() const {
    if (input_dim == 0 || client_hidden == 0 || boundary_dim == 0 || server_hidden == 0) {
      throw ConfigError("SplitSetup: all dimensions must be >= 1");
    }
    if (num_classes < 2) throw ConfigError("SplitSetup: need at least 2 classes");
  }
};

struct OptimConfig {
  double lr = 0.01;
  double momentum = 0.9;
};

struct ClientModel {
  nn::Network front;
  std::optional<nn::Network> head;
  nn::SgdOptimizer front_opt;
  nn::SgdOptimizer head_opt;

  friend bool operator==(const ClientModel&, const ClientModel&) = default;
};

template <class Rng>
nn::Network make_client_front(const SplitSetup& s, Rng& rng) {
  return nn::make_mlp({s.input_dim, s.client_hidden, s.boundary_dim}, nn::Activation::relu,
                      s.boundary_activation, rng);
}

template <class Rng>
ClientModel make_client(const SplitSetup& s, const OptimConfig& opt, Rng& rng) {
  s.validate();
  ClientModel c;
  c.front = make_client_front(s, rng);
  c.front_opt = nn::SgdOptimizer(opt.lr, opt.momentum);
  if (s.variant == SetupVariant::private_label) {
    c.head = nn::make_mlp({s.server_hidden, static_cast<std::size_t>(s.num_classes)},
                          nn::Activation::identity, nn::Activation::softmax, rng);
    c.head_opt = nn::SgdOptimizer(opt.lr, opt.momentum);
  }
  return c;
}

// The honest server-side layers for the given variant.
template <class Rng>
nn::Network make_server_body(const SplitSetup& s, Rng& rng) {
  if (s.variant == SetupVariant::label_sharing) {
    return nn::make_mlp({s.boundary_dim, s.server_hidden, static_cast<std::size_t>(s.num_classes)},
                        nn::Activation::relu, nn::Activation::softmax, rng);
  }
  return nn::make_mlp({s.boundary_dim, s.server_hidden}, nn::Activation::relu,
                      nn::Activation::relu, rng);
}

enum class BehaviorKind { honest, fsha, multitask };

inline std::string_view to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::honest: return "honest";
    case BehaviorKind::fsha: return "fsha";
    case BehaviorKind::multitask: return "multitask";
  }
  return "?";
}

inline BehaviorKind parse_behavior(std::string_view s) {
  if (s == "honest") return BehaviorKind::honest;
  if (s == "fsha") return BehaviorKind::fsha;
  if (s == "multitask") return BehaviorKind::multitask;
  throw ConfigError("unknown server behavior '" + std::string(s) + "'");
}

struct ServerBehavior {
  BehaviorKind kind = BehaviorKind::honest;
  double attack_weight = 1.0;  // multitask only: 1 = pure FSHA, 0 = pure classification

  void validate() const {
    if (attack_weight < 0.0 || attack_weight > 1.0) {
      throw ConfigError("ServerBehavior: attack_weight must be in [0,1]");
    }
  }
};

// Objective minimized by the distinguisher: the literal log form, or binary
// cross-entropy with the same minimizer.
enum class DistinguisherLoss { literal, cross_entropy };

inline DistinguisherLoss parse_distinguisher_loss(std::string_view s) {
  if (s == "literal") return DistinguisherLoss::literal;
  if (s == "cross-entropy" || s == "cross_entropy") return DistinguisherLoss::cross_entropy;
  throw ConfigError("unknown distinguisher loss '" + std::string(s) + "'");
}

// Attacker-side models: encoder (f~), decoder (f~^-1), distinguisher D and
// the public data X_pub they are trained on.
struct FshaState {
  nn::Network encoder;
  nn::Network decoder;
  nn::Network distinguisher;  // boundary -> hidden -> 1 (sigmoid); 1 means "encoder output"
  std::shared_ptr<const data::Dataset> pub_data;
  std::size_t setup_epochs = 5;
  std::size_t batch_size = 32;
  nn::SgdOptimizer encoder_opt;
  nn::SgdOptimizer decoder_opt;
  nn::SgdOptimizer distinguisher_opt;
  DistinguisherLoss distinguisher_loss = DistinguisherLoss::cross_entropy;
  bool setup_done = false;
  double setup_mse_before = 0.0;  // held-out reconstruction MSE before/after setup
  double setup_mse_after = 0.0;
};

struct FshaConfig {
  std::size_t setup_epochs = 5;
  std::size_t batch_size = 32;
  double autoencoder_lr = 0.01;
  double distinguisher_lr = 0.005;
  double momentum = 0.9;
  DistinguisherLoss distinguisher_loss = DistinguisherLoss::cross_entropy;
};

template <class Rng>
FshaState make_fsha_state(const SplitSetup& s, std::shared_ptr<const data::Dataset> pub,
                          const FshaConfig& cfg, Rng& rng) {
  if (!pub || pub->size() == 0) throw ConfigError("FSHA: public dataset is empty");
  if (pub->dim() != s.input_dim) throw ConfigError("FSHA: public data dim != client input dim");
  FshaState st;
  st.encoder = make_client_front(s, rng);
  st.decoder = nn::make_mlp({s.boundary_dim, s.client_hidden, s.input_dim}, nn::Activation::relu,
                            nn::Activation::identity, rng);
  st.distinguisher = nn::make_mlp({s.boundary_dim, s.server_hidden, 1}, nn::Activation::relu,
                                  nn::Activation::sigmoid, rng);
  st.pub_data = std::move(pub);
  st.setup_epochs = cfg.setup_epochs;
  st.distinguisher_loss = cfg.distinguisher_loss;
  st.batch_size = cfg.batch_size;
  st.encoder_opt = nn::SgdOptimizer(cfg.autoencoder_lr, cfg.momentum);
  st.decoder_opt = nn::SgdOptimizer(cfg.autoencoder_lr, cfg.momentum);
  st.distinguisher_opt = nn::SgdOptimizer(cfg.distinguisher_lr, cfg.momentum);
  return st;
}

struct ServerModel {
  ServerBehavior behavior;
  nn::Network body;
  nn::SgdOptimizer body_opt;
  std::optional<FshaState> fsha;
  std::mt19937_64 rng;
};

}  // namespace splitguard::protocol
