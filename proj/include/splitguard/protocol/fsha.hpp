#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/loss.hpp"
#include "splitguard/nn/network.hpp"
#include "splitguard/protocol/models.hpp"

namespace splitguard::protocol {

namespace detail {

inline double autoencoder_mse(const FshaState& st, const nn::Matrix& x) {
  if (x.rows() == 0) return 0.0;
  return nn::mean_squared_error(nn::predict(st.decoder, nn::predict(st.encoder, x)), x);
}

}  // namespace detail

// Setup phase: trains encoder and decoder to reconstruct X_pub. The last tenth
// of X_pub is held out to measure reconstruction error before and after.
template <class Rng>
FshaState fsha_setup(FshaState st, Rng& rng) {
  const auto& pub = *st.pub_data;
  if (pub.size() == 0) throw ConfigError("fsha_setup: public dataset is empty");
  const std::size_t n = pub.size();
  const std::size_t n_hold = n >= 10 ? n / 10 : 0;
  const std::size_t n_fit = n - n_hold;

  std::vector<std::size_t> hold_idx(n_hold);
  std::iota(hold_idx.begin(), hold_idx.end(), n_fit);
  const nn::Matrix held = nn::select_rows(pub.examples, hold_idx);
  st.setup_mse_before = detail::autoencoder_mse(st, held);

  std::vector<std::size_t> order(n_fit);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = std::min(st.batch_size, n_fit);
  for (std::size_t epoch = 0; epoch < st.setup_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b + bs <= n_fit; b += bs) {
      const nn::Matrix x = nn::select_rows(
          pub.examples, std::span<const std::size_t>(order.data() + b, bs));
      auto enc = nn::forward(st.encoder, x);
      auto dec = nn::forward(st.decoder, enc.output);
      const auto loss = nn::mse(dec.output, x);
      if (!std::isfinite(loss.loss)) throw NumericError("fsha_setup: autoencoder loss diverged");
      const auto dec_back = nn::backward(st.decoder, dec.cache, loss.grad);
      const auto enc_back = nn::backward(st.encoder, enc.cache, dec_back.input_grad);
      st.decoder_opt.step(st.decoder, dec_back.param_grad);
      st.encoder_opt.step(st.encoder, enc_back.param_grad);
    }
  }
  st.setup_mse_after = detail::autoencoder_mse(st, held);
  st.setup_done = true;
  return st;
}

// Decoder applied to client outputs: the attacker's reconstruction of the
// client's private inputs.
inline nn::Matrix reconstruct(const FshaState& st, const nn::Matrix& client_output) {
  if (!st.setup_done) throw UsageError("reconstruct: FSHA setup has not run");
  return nn::predict(st.decoder, client_output);
}

inline nn::Matrix reconstruct(const ServerModel& server, const nn::Matrix& client_output) {
  if (!server.fsha) throw UsageError("reconstruct: server has no attack state");
  return reconstruct(*server.fsha, client_output);
}

}  // namespace splitguard::protocol
